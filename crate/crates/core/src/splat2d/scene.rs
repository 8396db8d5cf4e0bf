use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SCENE_MAGIC: [u8; 4] = *b"S2D1";
const SCENE_VERSION: u16 = 1;
const FLOATS_PER_GAUSSIAN: usize = 9;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// 2D Gaussians in pixel units. Also used as the gradient and optimizer-moment container.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene2D {
    pub position: Vec<[f64; 2]>,
    pub log_scale: Vec<[f64; 2]>,
    /// Radians.
    pub angle: Vec<f64>,
    pub logit_opacity: Vec<f64>,
    /// Clamped to `[0, 1]` when rendering.
    pub color: Vec<[f64; 3]>,
}

impl Scene2D {
    pub fn zeros(m: usize) -> Self {
        Self {
            position: vec![[0.0; 2]; m],
            log_scale: vec![[0.0; 2]; m],
            angle: vec![0.0; m],
            logit_opacity: vec![0.0; m],
            color: vec![[0.0; 3]; m],
        }
    }

    pub fn len(&self) -> usize {
        self.angle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angle.is_empty()
    }

    pub fn push(
        &mut self,
        position: [f64; 2],
        log_scale: [f64; 2],
        angle: f64,
        logit_opacity: f64,
        color: [f64; 3],
    ) {
        self.position.push(position);
        self.log_scale.push(log_scale);
        self.angle.push(angle);
        self.logit_opacity.push(logit_opacity);
        self.color.push(color);
    }

    pub fn opacity(&self, i: usize) -> f64 {
        sigmoid(self.logit_opacity[i])
    }

    /// Random scene filling a `width × height` canvas.
    ///
    /// Scales are drawn between `min_scale` and `max_scale` pixels, opacities in
    /// roughly `[0.6, 0.95]`, colors uniformly.
    pub fn random(
        m: usize,
        width: usize,
        height: usize,
        min_scale: f64,
        max_scale: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::default();
        for _ in 0..m {
            s.push(
                [
                    rng.random::<f64>() * width as f64,
                    rng.random::<f64>() * height as f64,
                ],
                [
                    rng.random_range(min_scale..max_scale).ln(),
                    rng.random_range(min_scale..max_scale).ln(),
                ],
                rng.random::<f64>() * std::f64::consts::PI,
                rng.random_range(0.4..3.0),
                [rng.random(), rng.random(), rng.random()],
            );
        }
        s
    }

    /// Over-complete starting point for fitting: `m` Gaussians on a jittered
    /// grid with mid-gray color, opacity 0.5 and a common isotropic scale.
    pub fn grid_init(m: usize, width: usize, height: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aspect = width as f64 / height.max(1) as f64;
        let cols = ((m as f64 * aspect).sqrt().ceil() as usize).max(1);
        let rows = m.div_ceil(cols).max(1);
        let cell = (width as f64 / cols as f64).max(height as f64 / rows as f64);
        let mut s = Self::default();
        for i in 0..m {
            let (cx, cy) = ((i % cols) as f64 + 0.5, (i / cols) as f64 + 0.5);
            s.push(
                [
                    cx * width as f64 / cols as f64 + rng.random_range(-0.25..0.25),
                    cy * height as f64 / rows as f64 + rng.random_range(-0.25..0.25),
                ],
                [(0.6 * cell).ln(), (0.6 * cell).ln()],
                rng.random::<f64>() * std::f64::consts::PI,
                0.0,
                [0.5, 0.5, 0.5],
            );
        }
        s
    }

    /// New scene holding only the listed Gaussians, in that order.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            position: keep.iter().map(|&i| self.position[i]).collect(),
            log_scale: keep.iter().map(|&i| self.log_scale[i]).collect(),
            angle: keep.iter().map(|&i| self.angle[i]).collect(),
            logit_opacity: keep.iter().map(|&i| self.logit_opacity[i]).collect(),
            color: keep.iter().map(|&i| self.color[i]).collect(),
        }
    }

    /// Flat views of every parameter class, in a fixed order.
    pub(crate) fn classes_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.position.as_flattened_mut(),
            self.log_scale.as_flattened_mut(),
            &mut self.angle,
            &mut self.logit_opacity,
            self.color.as_flattened_mut(),
        ]
    }

    pub(crate) fn classes(&self) -> [&[f64]; 5] {
        [
            self.position.as_flattened(),
            self.log_scale.as_flattened(),
            &self.angle,
            &self.logit_opacity,
            self.color.as_flattened(),
        ]
    }

    fn row(&self, i: usize) -> [f64; FLOATS_PER_GAUSSIAN] {
        let (p, s, c) = (self.position[i], self.log_scale[i], self.color[i]);
        [
            p[0],
            p[1],
            s[0],
            s[1],
            self.angle[i],
            self.logit_opacity[i],
            c[0],
            c[1],
            c[2],
        ]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("not a scene checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported scene checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("scene checkpoint holds a non-finite value")]
    NonFinite,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes `"S2D1"`, version `u16`, reserved `u16`, count `u32`, then nine
/// little-endian `f64` per Gaussian (x, y, log-scale x/y, angle, opacity logit, r, g, b).
pub fn write_scene<W: Write>(scene: &Scene2D, mut w: W) -> io::Result<()> {
    let mut out = Vec::with_capacity(12 + scene.len() * FLOATS_PER_GAUSSIAN * 8);
    out.extend_from_slice(&SCENE_MAGIC);
    out.extend_from_slice(&SCENE_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(scene.len() as u32).to_le_bytes());
    for i in 0..scene.len() {
        for v in scene.row(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&out)
}

pub fn read_scene<R: Read>(mut r: R) -> Result<Scene2D, SceneError> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)?;
    if head[..4] != SCENE_MAGIC {
        return Err(SceneError::BadMagic);
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != SCENE_VERSION {
        return Err(SceneError::UnsupportedVersion(version));
    }
    let m = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut scene = Scene2D::default();
    let mut buf = [0u8; FLOATS_PER_GAUSSIAN * 8];
    for _ in 0..m {
        r.read_exact(&mut buf)?;
        let v: Vec<f64> = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SceneError::NonFinite);
        }
        scene.push([v[0], v[1]], [v[2], v[3]], v[4], v[5], [v[6], v[7], v[8]]);
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip() {
        let s = Scene2D::random(7, 20, 10, 1.0, 3.0, 1);
        let mut bytes = Vec::new();
        write_scene(&s, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 12 + 7 * 72);
        assert_eq!(read_scene(&bytes[..]).unwrap(), s);
        bytes[0] = b'X';
        assert!(matches!(read_scene(&bytes[..]), Err(SceneError::BadMagic)));
    }

    #[test]
    fn grid_init_covers_canvas() {
        let s = Scene2D::grid_init(100, 32, 16, 0);
        assert_eq!(s.len(), 100);
        assert!(s
            .position
            .iter()
            .all(|p| p[0] > -1.0 && p[0] < 33.0 && p[1] > -1.0 && p[1] < 17.0));
    }
}
