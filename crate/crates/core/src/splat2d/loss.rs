use super::scene::{sigmoid, Scene2D};
use crate::image::{Image, ImageError};
use crate::metrics::ssim_with_grad;

pub const L1_WEIGHT: f64 = 0.8;
pub const SSIM_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub total: f64,
    /// Mean absolute error over pixels and channels.
    pub l1: f64,
    pub ssim: f64,
    /// `reg_lambda · Σ σ_i`.
    pub reg: f64,
    /// d total / d rendered pixel, laid out like [`Image::data`].
    pub image_grad: Vec<f64>,
    /// d reg / d logit opacity.
    pub opacity_grad: Vec<f64>,
}

/// `0.8·L1 + 0.2·(1 − SSIM) + reg_lambda·Σσ` and its gradients.
pub fn loss(
    render: &Image,
    target: &Image,
    scene: &Scene2D,
    reg_lambda: f64,
) -> Result<LossOutput, ImageError> {
    render.same_shape(target)?;
    let n = render.data.len().max(1) as f64;
    let mut l1 = 0.0;
    let mut image_grad: Vec<f64> = render
        .data
        .iter()
        .zip(&target.data)
        .map(|(&r, &t)| {
            let d = r - t;
            l1 += d.abs();
            if d > 0.0 {
                L1_WEIGHT / n
            } else if d < 0.0 {
                -L1_WEIGHT / n
            } else {
                0.0
            }
        })
        .collect();
    l1 /= n;
    let (ssim, ssim_grad) = ssim_with_grad(render, target)?;
    for (g, s) in image_grad.iter_mut().zip(&ssim_grad) {
        *g -= SSIM_WEIGHT * s;
    }
    let mut reg = 0.0;
    let opacity_grad = scene
        .logit_opacity
        .iter()
        .map(|&x| {
            let s = sigmoid(x);
            reg += s;
            reg_lambda * s * (1.0 - s)
        })
        .collect();
    reg *= reg_lambda;
    Ok(LossOutput {
        total: L1_WEIGHT * l1 + SSIM_WEIGHT * (1.0 - ssim) + reg,
        l1,
        ssim,
        reg,
        image_grad,
        opacity_grad,
    })
}
