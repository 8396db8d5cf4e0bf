use super::scene::{sigmoid, Scene2D};
use crate::image::Image;
use crate::par;

/// Contributions with smaller alpha are skipped.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Compositing stops once transmittance falls below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;

/// Per-Gaussian quantities shared by every pixel.
struct Prepared {
    mean: [f64; 2],
    cos: f64,
    sin: f64,
    inv_sx2: f64,
    inv_sy2: f64,
    opacity: f64,
    color: [f64; 3],
    /// Inclusive pixel bounds of the region where alpha can reach `ALPHA_MIN`.
    x0: isize,
    x1: isize,
    y0: isize,
    y1: isize,
}

fn prepare(scene: &Scene2D, width: usize, height: usize) -> Vec<Prepared> {
    (0..scene.len())
        .map(|i| {
            let mean = scene.position[i];
            let [lsx, lsy] = scene.log_scale[i];
            let (sin, cos) = scene.angle[i].sin_cos();
            let (sx2, sy2) = ((2.0 * lsx).exp(), (2.0 * lsy).exp());
            let opacity = sigmoid(scene.logit_opacity[i]);
            let color = scene.color[i].map(|c| c.clamp(0.0, 1.0));
            // alpha >= ALPHA_MIN  <=>  q <= 2 ln(opacity / ALPHA_MIN)
            let q_max = 2.0 * (opacity / ALPHA_MIN).ln();
            let (x0, x1, y0, y1) = if q_max >= 0.0 && q_max.is_finite() {
                let r = q_max.sqrt();
                let ex = r * (cos * cos * sx2 + sin * sin * sy2).sqrt() + 1.0;
                let ey = r * (sin * sin * sx2 + cos * cos * sy2).sqrt() + 1.0;
                let lo = |m: f64, e: f64| ((m - e - 0.5).floor() as isize).max(0);
                let hi =
                    |m: f64, e: f64, n: usize| ((m + e - 0.5).ceil() as isize).min(n as isize - 1);
                (
                    lo(mean[0], ex),
                    hi(mean[0], ex, width),
                    lo(mean[1], ey),
                    hi(mean[1], ey, height),
                )
            } else {
                (0, -1, 0, -1)
            };
            Prepared {
                mean,
                cos,
                sin,
                inv_sx2: 1.0 / sx2,
                inv_sy2: 1.0 / sy2,
                opacity,
                color,
                x0,
                x1,
                y0,
                y1,
            }
        })
        .collect()
}

/// Evaluation of one Gaussian at one pixel.
struct Sample {
    dx: f64,
    dy: f64,
    u: f64,
    v: f64,
    gauss: f64,
    alpha: f64,
}

#[inline]
fn sample(g: &Prepared, px: f64, py: f64) -> Sample {
    let dx = px - g.mean[0];
    let dy = py - g.mean[1];
    let u = g.cos * dx + g.sin * dy;
    let v = -g.sin * dx + g.cos * dy;
    let q = u * u * g.inv_sx2 + v * v * g.inv_sy2;
    let gauss = (-0.5 * q).exp();
    Sample {
        dx,
        dy,
        u,
        v,
        gauss,
        alpha: g.opacity * gauss,
    }
}

fn row_candidates(prep: &[Prepared], y: usize) -> Vec<usize> {
    let y = y as isize;
    (0..prep.len())
        .filter(|&i| prep[i].y0 <= y && y <= prep[i].y1 && prep[i].x0 <= prep[i].x1)
        .collect()
}

/// Renders `scene` onto a black `width × height` canvas. Pixel `(x, y)` is sampled at its center.
pub fn render(scene: &Scene2D, width: usize, height: usize) -> Image {
    let prep = prepare(scene, width, height);
    let rows = par::map_range(height, |y| {
        let cand = row_candidates(&prep, y);
        let mut out = vec![0.0; width * 3];
        let py = y as f64 + 0.5;
        for x in 0..width {
            let xi = x as isize;
            let px = x as f64 + 0.5;
            let mut t = 1.0;
            let mut c = [0.0; 3];
            for &i in &cand {
                let g = &prep[i];
                if xi < g.x0 || xi > g.x1 {
                    continue;
                }
                let s = sample(g, px, py);
                if s.alpha < ALPHA_MIN {
                    continue;
                }
                for ch in 0..3 {
                    c[ch] += g.color[ch] * s.alpha * t;
                }
                t *= 1.0 - s.alpha;
                if t < TRANSMITTANCE_MIN {
                    break;
                }
            }
            out[x * 3..x * 3 + 3].copy_from_slice(&c);
        }
        out
    });
    Image {
        width,
        height,
        data: rows.concat(),
    }
}

/// Gradients of `Σ image_grad · render(scene)` with respect to every scene parameter.
///
/// `image_grad` is laid out like [`Image::data`]. Per-row partial sums are
/// combined in row order, so the result does not depend on the thread count.
pub fn render_backward(
    scene: &Scene2D,
    width: usize,
    height: usize,
    image_grad: &[f64],
) -> Scene2D {
    assert_eq!(
        image_grad.len(),
        width * height * 3,
        "gradient image shape mismatch"
    );
    let m = scene.len();
    let prep = prepare(scene, width, height);
    let color_passes: Vec<[bool; 3]> = scene
        .color
        .iter()
        .map(|c| c.map(|v| (0.0..=1.0).contains(&v)))
        .collect();
    // Per Gaussian: mx, my, lsx, lsy, angle, logit, r, g, b
    let partials = par::map_range(height, |y| {
        let cand = row_candidates(&prep, y);
        let mut acc: Vec<(usize, [f64; 9])> = Vec::new();
        let mut slot = vec![usize::MAX; m];
        let py = y as f64 + 0.5;
        let mut hits: Vec<(usize, Sample, f64)> = Vec::new();
        for x in 0..width {
            let gp = &image_grad[(y * width + x) * 3..(y * width + x) * 3 + 3];
            if gp.iter().all(|&v| v == 0.0) {
                continue;
            }
            let xi = x as isize;
            let px = x as f64 + 0.5;
            hits.clear();
            let mut t = 1.0;
            for &i in &cand {
                let g = &prep[i];
                if xi < g.x0 || xi > g.x1 {
                    continue;
                }
                let s = sample(g, px, py);
                if s.alpha < ALPHA_MIN {
                    continue;
                }
                let a = s.alpha;
                hits.push((i, s, t));
                t *= 1.0 - a;
                if t < TRANSMITTANCE_MIN {
                    break;
                }
            }
            // Color composited behind the current Gaussian, black background.
            let mut behind = [0.0; 3];
            for (i, s, t_before) in hits.iter().rev() {
                let g = &prep[*i];
                if slot[*i] == usize::MAX {
                    slot[*i] = acc.len();
                    acc.push((*i, [0.0; 9]));
                }
                let d = &mut acc[slot[*i]].1;
                let mut d_alpha = 0.0;
                for ch in 0..3 {
                    if color_passes[*i][ch] {
                        d[6 + ch] += gp[ch] * s.alpha * t_before;
                    }
                    d_alpha += gp[ch] * t_before * (g.color[ch] - behind[ch]);
                    behind[ch] = g.color[ch] * s.alpha + (1.0 - s.alpha) * behind[ch];
                }
                d[5] += d_alpha * s.gauss * g.opacity * (1.0 - g.opacity);
                let d_q = -0.5 * d_alpha * s.alpha;
                let dq_du = 2.0 * s.u * g.inv_sx2;
                let dq_dv = 2.0 * s.v * g.inv_sy2;
                d[0] += d_q * (-g.cos * dq_du + g.sin * dq_dv);
                d[1] += d_q * (-g.sin * dq_du - g.cos * dq_dv);
                d[2] += d_q * (-2.0 * s.u * s.u * g.inv_sx2);
                d[3] += d_q * (-2.0 * s.v * s.v * g.inv_sy2);
                d[4] += d_q * (dq_du * s.v - dq_dv * s.u);
                let _ = (s.dx, s.dy);
            }
        }
        acc.sort_unstable_by_key(|e| e.0);
        acc
    });
    let mut grads = Scene2D::zeros(m);
    for row in partials {
        for (i, d) in row {
            grads.position[i][0] += d[0];
            grads.position[i][1] += d[1];
            grads.log_scale[i][0] += d[2];
            grads.log_scale[i][1] += d[3];
            grads.angle[i] += d[4];
            grads.logit_opacity[i] += d[5];
            grads.color[i][0] += d[6];
            grads.color[i][1] += d[7];
            grads.color[i][2] += d[8];
        }
    }
    grads
}
