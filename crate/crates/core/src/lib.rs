//! Compression toolkit for Gaussian splatting models.
//!
//! The pipeline clusters the four high-dimensional parameter groups of every
//! Gaussian (DC color, spherical-harmonic color, scale, rotation) into K-means
//! codebooks, sorts the Gaussians by one code stream and run-length encodes it,
//! bit-packs the remaining index streams and optionally Absmax-quantizes the
//! position and opacity residuals.
//!
//! [`splat2d`] is a small differentiable 2D splatting trainer used to exercise
//! quantization-aware training (straight-through gradients, decoupled centroid
//! and assignment updates, opacity regularization and pruning) at desk scale.

pub mod bitq;
pub mod codec;
pub mod image;
pub mod matrix;
pub mod metrics;
pub mod model;
mod par;
pub mod ply_io;
pub mod splat2d;
pub mod vq;

pub use bitq::{BitQuantChannel, BitQuantPolicy, BitWidth};
pub use codec::{decode, encode, EncodeOptions, ResidualPolicy};
pub use image::Image;
pub use matrix::{Matrix, MatrixRef, Scalar};
pub use model::{Field, GaussianCloud, ParamGroup};
pub use vq::{CloudCodebooks, Codebook, VqConfig};
