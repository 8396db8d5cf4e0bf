//! Browser bindings for the demo page in `www/`.
//!
//! Everything crossing the boundary is a number, a `Vec<u8>` or a `Vec<f32>`,
//! so the same functions run natively under `cargo test`.

use gscodec::bitq::{absmax_dequantize, absmax_quantize};
use gscodec::splat2d::{
    post_train_quantize, render, train, QatSchedule, Scene2D, TrainConfig, Vq2dConfig,
};
use gscodec::vq::{lloyd, KMeansParams};
use gscodec::{BitWidth, Image, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// A small 2D scene fitted once, then re-rendered under codebooks of any size.
#[wasm_bindgen]
pub struct SplatDemo {
    width: usize,
    height: usize,
    target: Image,
    scene: Scene2D,
    seed: u64,
    psnr: f64,
}

#[wasm_bindgen]
impl SplatDemo {
    /// Renders a random `truth`-Gaussian target and fits `gaussians` Gaussians to it.
    #[wasm_bindgen(constructor)]
    pub fn new(
        size: usize,
        truth: usize,
        gaussians: usize,
        iterations: usize,
        seed: u64,
    ) -> SplatDemo {
        let size = size.max(8);
        let max_scale = (size as f64 / 10.0).max(1.5);
        let target = render(
            &Scene2D::random(truth, size, size, 1.0, max_scale, seed),
            size,
            size,
        );
        let config = TrainConfig {
            schedule: QatSchedule::unquantized(iterations.max(1)),
            ..Default::default()
        };
        let fitted = train(
            std::slice::from_ref(&target),
            Scene2D::grid_init(gaussians.max(1), size, size, seed),
            &config,
        )
        .expect_throw("training a non-empty target");
        SplatDemo {
            width: size,
            height: size,
            target,
            psnr: fitted.final_psnr,
            scene: fitted.scene,
            seed,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn count(&self) -> usize {
        self.scene.len()
    }

    /// PSNR of the most recent render against the target.
    pub fn psnr(&self) -> f64 {
        self.psnr
    }

    pub fn target_rgba(&self) -> Vec<u8> {
        self.target.to_rgba8()
    }

    /// RGBA pixels with color, scale and angle each snapped to `k` centroids.
    /// `k = 0` renders the unquantized scene.
    pub fn render_quantized(&mut self, k: usize) -> Vec<u8> {
        let view = if k == 0 {
            self.scene.clone()
        } else {
            let config = Vq2dConfig {
                seed: self.seed,
                ..Vq2dConfig::uniform(k)
            };
            post_train_quantize(&self.scene, &config)
                .expect_throw("k >= 1")
                .0
        };
        let image = render(&view, self.width, self.height);
        self.psnr = gscodec::metrics::psnr(&image, &self.target, 1.0).expect_throw("same shape");
        image.to_rgba8()
    }
}

/// Absmax quantization of one random channel at 4, 8 and 16 bits.
///
/// Returns `len` original values followed by the three reconstructions, then
/// for each width the largest observed error and the bound `scale / (2^(b-1) - 1)`.
#[wasm_bindgen]
pub fn absmax_errors(len: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel: Vec<f32> = (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let mut out = channel.clone();
    let mut stats = Vec::new();
    for bits in BitWidth::ALL {
        let q = absmax_quantize(&channel, bits).expect_throw("finite input");
        let restored = absmax_dequantize(&q);
        let worst = channel
            .iter()
            .zip(&restored)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        out.extend_from_slice(&restored);
        stats.extend([worst, q.error_bound() as f32]);
    }
    out.extend(stats);
    out
}

/// k-means on `n` points drawn around a few random centers in the unit square.
///
/// Returns `[x, y, cluster]` per point, then `[x, y]` per centroid.
#[wasm_bindgen]
pub fn kmeans_scatter(n: usize, k: usize, iterations: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<[f32; 2]> = (0..5)
        .map(|_| [rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)])
        .collect();
    let points: Vec<f32> = (0..n.max(1))
        .flat_map(|_| {
            let c = blobs[rng.random_range(0..blobs.len())];
            [
                c[0] + rng.random_range(-0.12..0.12),
                c[1] + rng.random_range(-0.12..0.12),
            ]
        })
        .collect();
    let data = Matrix::from_vec(points.len() / 2, 2, points);
    let params = KMeansParams {
        seed,
        ..KMeansParams::new(k.clamp(1, data.rows()), iterations)
    };
    let run = lloyd(data.view(), &params).expect_throw("1 <= k <= n");
    let book = run.codebook;
    let mut out = Vec::with_capacity(data.rows() * 3 + book.centroids.rows() * 2);
    for (i, &a) in book.assignments.iter().enumerate() {
        out.extend_from_slice(data.row(i));
        out.push(a as f32);
    }
    out.extend_from_slice(book.centroids.as_slice());
    out
}
