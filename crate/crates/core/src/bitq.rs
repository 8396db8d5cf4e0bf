//! Symmetric Absmax scalar quantization.
//!
//! Each scalar column gets its own scale `s = max |x|`; a value is stored as
//! the integer `round(x · q / s)` with `q = 2^(b-1) - 1` and rounding half away
//! from zero, and restored as `code · s / q`.

use serde::Serialize;

use crate::model::{Field, GaussianCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BitWidth {
    #[serde(rename = "4")]
    B4,
    #[serde(rename = "8")]
    B8,
    #[serde(rename = "16")]
    B16,
}

impl BitWidth {
    pub const ALL: [BitWidth; 3] = [BitWidth::B4, BitWidth::B8, BitWidth::B16];

    pub const fn bits(self) -> u32 {
        match self {
            BitWidth::B4 => 4,
            BitWidth::B8 => 8,
            BitWidth::B16 => 16,
        }
    }

    /// Largest code magnitude, `2^(b-1) - 1`.
    pub const fn qmax(self) -> i32 {
        (1 << (self.bits() - 1)) - 1
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            4 => Some(BitWidth::B4),
            8 => Some(BitWidth::B8),
            16 => Some(BitWidth::B16),
            _ => None,
        }
    }

    /// Bytes needed for `n` packed codes.
    pub const fn payload_bytes(self, n: usize) -> usize {
        (n * self.bits() as usize).div_ceil(8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum BitqError {
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f32 },
}

/// One quantized scalar column.
#[derive(Debug, Clone, PartialEq)]
pub struct BitQuantChannel {
    pub bits: BitWidth,
    pub scale: f32,
    pub values: Vec<i16>,
}

impl BitQuantChannel {
    /// Largest possible absolute reconstruction error, `scale / q`.
    pub fn error_bound(&self) -> f64 {
        f64::from(self.scale) / f64::from(self.bits.qmax())
    }
}

/// Quantizes one column. An all-zero column stores scale 0 and zero codes.
pub fn absmax_quantize(channel: &[f32], bits: BitWidth) -> Result<BitQuantChannel, BitqError> {
    if let Some(index) = channel.iter().position(|x| !x.is_finite()) {
        return Err(BitqError::NonFinite {
            index,
            value: channel[index],
        });
    }
    let scale = channel.iter().fold(0f32, |m, x| m.max(x.abs()));
    let q = f64::from(bits.qmax());
    let values = if scale == 0.0 {
        vec![0; channel.len()]
    } else {
        let s = f64::from(scale);
        // f64::round rounds half away from zero.
        channel
            .iter()
            .map(|&x| (f64::from(x) * q / s).round() as i16)
            .collect()
    };
    Ok(BitQuantChannel {
        bits,
        scale,
        values,
    })
}

pub fn absmax_dequantize(channel: &BitQuantChannel) -> Vec<f32> {
    let q = f64::from(channel.bits.qmax());
    let s = f64::from(channel.scale);
    channel
        .values
        .iter()
        .map(|&v| (f64::from(v) * s / q) as f32)
        .collect()
}

/// Bit width per field; `None` keeps float32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BitQuantPolicy {
    pub position: Option<BitWidth>,
    pub log_scale: Option<BitWidth>,
    pub rotation: Option<BitWidth>,
    pub logit_opacity: Option<BitWidth>,
    pub color_dc: Option<BitWidth>,
    pub color_sh: Option<BitWidth>,
}

impl BitQuantPolicy {
    /// Everything float32.
    pub fn float32() -> Self {
        Self::default()
    }

    /// 16-bit position, 8-bit opacity; codebooked groups untouched.
    pub fn compgs_bitq() -> Self {
        Self {
            position: Some(BitWidth::B16),
            logit_opacity: Some(BitWidth::B8),
            ..Self::default()
        }
    }

    fn all(bits: BitWidth) -> Self {
        Self {
            position: Some(bits),
            log_scale: Some(bits),
            rotation: Some(bits),
            logit_opacity: Some(bits),
            color_dc: Some(bits),
            color_sh: Some(bits),
        }
    }

    pub fn int16() -> Self {
        Self::all(BitWidth::B16)
    }

    pub fn int8() -> Self {
        Self::all(BitWidth::B8)
    }

    pub fn int8_no_pos() -> Self {
        Self {
            position: None,
            ..Self::all(BitWidth::B8)
        }
    }

    pub fn int4_no_pos() -> Self {
        Self {
            position: None,
            ..Self::all(BitWidth::B4)
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "float32" => Self::float32(),
            "compgs-bitq" => Self::compgs_bitq(),
            "int16" => Self::int16(),
            "int8" => Self::int8(),
            "int8-no-pos" => Self::int8_no_pos(),
            "int4-no-pos" => Self::int4_no_pos(),
            _ => return None,
        })
    }

    pub fn get(&self, field: Field) -> Option<BitWidth> {
        match field {
            Field::Position => self.position,
            Field::LogScale => self.log_scale,
            Field::Rotation => self.rotation,
            Field::LogitOpacity => self.logit_opacity,
            Field::ColorDc => self.color_dc,
            Field::ColorSh => self.color_sh,
        }
    }
}

/// Storage used by one field under a policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldSize {
    pub field: &'static str,
    pub bits: u32,
    pub columns: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicySizeReport {
    pub fields: Vec<FieldSize>,
    pub total_bytes: usize,
}

/// Quantizes and dequantizes every selected column independently.
///
/// Quantized columns cost their packed codes plus a 4-byte scale.
pub fn apply_policy(
    cloud: &GaussianCloud,
    policy: &BitQuantPolicy,
) -> (GaussianCloud, PolicySizeReport) {
    let n = cloud.count;
    let mut out = cloud.clone();
    let mut fields = Vec::new();
    for field in Field::ALL {
        let d = field.dim();
        let (bits, bytes) = match policy.get(field) {
            None => (32, n * d * 4),
            Some(bw) => {
                let block = out.field_mut(field);
                let mut column = vec![0f32; n];
                for c in 0..d {
                    for (i, slot) in column.iter_mut().enumerate() {
                        *slot = block[i * d + c];
                    }
                    let q = absmax_quantize(&column, bw).expect("cloud values are finite");
                    for (i, v) in absmax_dequantize(&q).into_iter().enumerate() {
                        block[i * d + c] = v;
                    }
                }
                (bw.bits(), d * (bw.payload_bytes(n) + 4))
            }
        };
        fields.push(FieldSize {
            field: field.name(),
            bits,
            columns: d,
            bytes,
        });
    }
    let total_bytes = fields.iter().map(|f| f.bytes).sum();
    (
        out,
        PolicySizeReport {
            fields,
            total_bytes,
        },
    )
}
