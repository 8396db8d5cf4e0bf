//! Desk-scale differentiable 2D Gaussian splatting.
//!
//! A [`Scene2D`] is a list of anisotropic 2D Gaussians composited front to back
//! in index order. The trainer runs the same quantization-aware loop the 3D
//! codec targets: render with codebook centroids, copy the centroid gradients
//! straight through to the non-quantized parameters, refresh centroids every
//! step and assignments on a schedule, and prune Gaussians whose opacity was
//! driven to zero by an ℓ1 penalty.

mod loss;
mod render;
mod scene;
mod train;

pub use loss::{loss, LossOutput, L1_WEIGHT, SSIM_WEIGHT};
pub use render::{render, render_backward, ALPHA_MIN, TRANSMITTANCE_MIN};
pub use scene::{read_scene, sigmoid, write_scene, Scene2D, SceneError, SCENE_MAGIC};
pub use train::{
    post_train_quantize, prune, quantized_view, ste_step, train, write_trace_csv, LearningRates,
    Optimizer, QatSchedule, SceneCodebooks, StepOutcome, TraceRow, TrainConfig, TrainError,
    TrainResult, TrainState, Vq2dConfig,
};
