//! Gaussian cloud data model.
//!
//! A [`GaussianCloud`] stores every parameter block as its own row-major
//! `N × d` array (structure of arrays). The logical 59-column layout of one
//! Gaussian is
//!
//! | columns | field           | stored as                      |
//! |---------|-----------------|--------------------------------|
//! | 0..3    | position        | world units                    |
//! | 3..6    | log-scale       | before the exponential         |
//! | 6..10   | rotation        | quaternion before normalizing  |
//! | 10      | opacity         | logit, before the sigmoid      |
//! | 11..14  | DC color        | SH band 0                      |
//! | 14..59  | SH rest         | 15 coefficients per channel, channel-major |
//!
//! Quantization and serialization always act on these pre-activation values.

use std::fmt;

use crate::matrix::MatrixRef;

/// Number of scalar parameters per Gaussian.
pub const PARAMS_PER_GAUSSIAN: usize = 59;

/// Number of SH "rest" coefficients (order 3, three color channels).
pub const SH_REST_DIM: usize = 45;

/// A contiguous block of per-Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Position,
    LogScale,
    Rotation,
    LogitOpacity,
    ColorDc,
    ColorSh,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Position,
        Field::LogScale,
        Field::Rotation,
        Field::LogitOpacity,
        Field::ColorDc,
        Field::ColorSh,
    ];

    pub const fn dim(self) -> usize {
        match self {
            Field::Position | Field::LogScale | Field::ColorDc => 3,
            Field::Rotation => 4,
            Field::LogitOpacity => 1,
            Field::ColorSh => SH_REST_DIM,
        }
    }

    /// Column range of this field in the 59-column layout.
    pub const fn columns(self) -> std::ops::Range<usize> {
        let start = match self {
            Field::Position => 0,
            Field::LogScale => 3,
            Field::Rotation => 6,
            Field::LogitOpacity => 10,
            Field::ColorDc => 11,
            Field::ColorSh => 14,
        };
        start..start + self.dim()
    }

    pub const fn name(self) -> &'static str {
        match self {
            Field::Position => "position",
            Field::LogScale => "log_scale",
            Field::Rotation => "rotation",
            Field::LogitOpacity => "logit_opacity",
            Field::ColorDc => "color_dc",
            Field::ColorSh => "color_sh",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the four vector-quantized parameter groups.
///
/// Position and opacity are never codebooked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    ColorDc,
    Sh,
    Scale,
    Rotation,
}

impl ParamGroup {
    /// Canonical order used by codebooks and the container format.
    pub const ALL: [ParamGroup; 4] = [
        ParamGroup::ColorDc,
        ParamGroup::Sh,
        ParamGroup::Scale,
        ParamGroup::Rotation,
    ];

    pub const fn dim(self) -> usize {
        self.field().dim()
    }

    pub const fn field(self) -> Field {
        match self {
            ParamGroup::ColorDc => Field::ColorDc,
            ParamGroup::Sh => Field::ColorSh,
            ParamGroup::Scale => Field::LogScale,
            ParamGroup::Rotation => Field::Rotation,
        }
    }

    /// Position in [`ParamGroup::ALL`]; also the on-disk group id.
    pub const fn index(self) -> usize {
        match self {
            ParamGroup::ColorDc => 0,
            ParamGroup::Sh => 1,
            ParamGroup::Scale => 2,
            ParamGroup::Rotation => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            ParamGroup::ColorDc => "dc",
            ParamGroup::Sh => "sh",
            ParamGroup::Scale => "scale",
            ParamGroup::Rotation => "rotation",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A structural problem found by [`GaussianCloud::validate`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CloudError {
    #[error("{field}: expected {expected} values ({count} x {dim}), found {found}")]
    Shape {
        field: Field,
        count: usize,
        dim: usize,
        expected: usize,
        found: usize,
    },
    #[error("{field}: non-finite value {value} at row {row}, column {column}")]
    NonFinite {
        field: Field,
        row: usize,
        column: usize,
        value: f32,
    },
}

/// Columnar store of `count` Gaussians.
///
/// Each block is row-major `count × field.dim()`. Fields are public so that
/// loaders can fill them directly; call [`validate`](Self::validate) (or build
/// through [`try_new`](Self::try_new)) before handing a cloud to other modules.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianCloud {
    pub count: usize,
    pub position: Vec<f32>,
    pub log_scale: Vec<f32>,
    pub rotation: Vec<f32>,
    pub logit_opacity: Vec<f32>,
    pub color_dc: Vec<f32>,
    pub color_sh: Vec<f32>,
}

impl GaussianCloud {
    /// All-zero cloud of `count` Gaussians.
    pub fn zeros(count: usize) -> Self {
        let mut cloud = Self {
            count,
            ..Self::default()
        };
        for field in Field::ALL {
            *cloud.field_mut(field) = vec![0.0; count * field.dim()];
        }
        cloud
    }

    /// Builds a cloud from its six blocks and validates it.
    pub fn try_new(
        position: Vec<f32>,
        log_scale: Vec<f32>,
        rotation: Vec<f32>,
        logit_opacity: Vec<f32>,
        color_dc: Vec<f32>,
        color_sh: Vec<f32>,
    ) -> Result<Self, Vec<CloudError>> {
        let cloud = Self {
            count: logit_opacity.len(),
            position,
            log_scale,
            rotation,
            logit_opacity,
            color_dc,
            color_sh,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    /// Builds a cloud from full 59-value rows in the documented column order.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self, Vec<CloudError>> {
        let mut cloud = Self::zeros(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            assert_eq!(
                row.len(),
                PARAMS_PER_GAUSSIAN,
                "row {i} must have 59 values"
            );
            cloud.set_row(i, row);
        }
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn field(&self, field: Field) -> &[f32] {
        match field {
            Field::Position => &self.position,
            Field::LogScale => &self.log_scale,
            Field::Rotation => &self.rotation,
            Field::LogitOpacity => &self.logit_opacity,
            Field::ColorDc => &self.color_dc,
            Field::ColorSh => &self.color_sh,
        }
    }

    pub fn field_mut(&mut self, field: Field) -> &mut Vec<f32> {
        match field {
            Field::Position => &mut self.position,
            Field::LogScale => &mut self.log_scale,
            Field::Rotation => &mut self.rotation,
            Field::LogitOpacity => &mut self.logit_opacity,
            Field::ColorDc => &mut self.color_dc,
            Field::ColorSh => &mut self.color_sh,
        }
    }

    /// Zero-copy `count × dim` view of one field. Panics on a malformed cloud.
    pub fn field_view(&self, field: Field) -> MatrixRef<'_, f32> {
        MatrixRef::new(self.count, field.dim(), self.field(field))
    }

    /// Zero-copy `count × group.dim()` view of a quantizable group.
    pub fn group_view(&self, group: ParamGroup) -> MatrixRef<'_, f32> {
        self.field_view(group.field())
    }

    /// The full 59-value row of Gaussian `i`.
    pub fn row(&self, i: usize) -> [f32; PARAMS_PER_GAUSSIAN] {
        let mut out = [0.0; PARAMS_PER_GAUSSIAN];
        for field in Field::ALL {
            let d = field.dim();
            out[field.columns()].copy_from_slice(&self.field(field)[i * d..(i + 1) * d]);
        }
        out
    }

    pub fn set_row(&mut self, i: usize, row: &[f32]) {
        for field in Field::ALL {
            let d = field.dim();
            let cols = field.columns();
            self.field_mut(field)[i * d..(i + 1) * d].copy_from_slice(&row[cols]);
        }
    }

    /// New cloud holding rows `order[0], order[1], …` of `self`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut out = Self {
            count: order.len(),
            ..Self::default()
        };
        for field in Field::ALL {
            let d = field.dim();
            let src = self.field(field);
            let dst = out.field_mut(field);
            dst.reserve_exact(order.len() * d);
            for &i in order {
                dst.extend_from_slice(&src[i * d..(i + 1) * d]);
            }
        }
        out
    }

    /// Reports every shape mismatch and non-finite value. Never panics.
    pub fn validate(&self) -> Result<(), Vec<CloudError>> {
        let mut errors = Vec::new();
        for field in Field::ALL {
            let dim = field.dim();
            let data = self.field(field);
            let expected = self.count * dim;
            if data.len() != expected {
                errors.push(CloudError::Shape {
                    field,
                    count: self.count,
                    dim,
                    expected,
                    found: data.len(),
                });
                continue;
            }
            for (idx, &value) in data.iter().enumerate() {
                if !value.is_finite() {
                    errors.push(CloudError::NonFinite {
                        field,
                        row: idx / dim,
                        column: idx % dim,
                        value,
                    });
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}
