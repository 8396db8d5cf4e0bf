//! Image quality and storage metrics.

use serde::Serialize;

use crate::codec::{index_bits, SizeReport};
use crate::image::{Image, ImageError};

/// SSIM Gaussian window: 11 taps, σ = 1.5.
pub const SSIM_WINDOW_RADIUS: usize = 5;
pub const SSIM_WINDOW_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

pub fn mse(a: &Image, b: &Image) -> Result<f64, ImageError> {
    a.same_shape(b)?;
    if a.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data.len() as f64)
}

fn psnr_from_mse(mse: f64, max_value: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_value * max_value / mse).log10()
    }
}

/// PSNR over all channels jointly. Identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, max_value: f64) -> Result<f64, ImageError> {
    Ok(psnr_from_mse(mse(a, b)?, max_value))
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no image pairs given")]
    Empty,
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// PSNR of the mean MSE over all pairs.
pub fn psnr_am(pairs: &[(&Image, &Image)], max_value: f64) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for (a, b) in pairs {
        total += mse(a, b)?;
    }
    Ok(psnr_from_mse(total / pairs.len() as f64, max_value))
}

/// Truncated Gaussian weights along one axis, renormalized at the borders so
/// every output sample is a proper weighted mean.
#[derive(Debug, Clone)]
struct AxisFilter {
    /// Per output position: first input index and its weights.
    taps: Vec<(usize, Vec<f64>)>,
}

impl AxisFilter {
    fn new(len: usize) -> Self {
        let r = SSIM_WINDOW_RADIUS as isize;
        let g =
            |t: isize| (-((t * t) as f64) / (2.0 * SSIM_WINDOW_SIGMA * SSIM_WINDOW_SIGMA)).exp();
        let taps = (0..len as isize)
            .map(|p| {
                let lo = (p - r).max(0);
                let hi = (p + r).min(len as isize - 1);
                let w: Vec<f64> = (lo..=hi).map(|q| g(p - q)).collect();
                let z: f64 = w.iter().sum();
                (lo as usize, w.into_iter().map(|x| x / z).collect())
            })
            .collect();
        Self { taps }
    }

    fn apply(&self, input: &[f64], stride: usize, out: &mut [f64]) {
        for (p, (lo, w)) in self.taps.iter().enumerate() {
            out[p * stride] = w
                .iter()
                .enumerate()
                .map(|(j, wj)| wj * input[(lo + j) * stride])
                .sum();
        }
    }

    fn apply_transpose(&self, input: &[f64], stride: usize, out: &mut [f64]) {
        for (p, _) in self.taps.iter().enumerate() {
            out[p * stride] = 0.0;
        }
        for (p, (lo, w)) in self.taps.iter().enumerate() {
            let v = input[p * stride];
            for (j, wj) in w.iter().enumerate() {
                out[(lo + j) * stride] += wj * v;
            }
        }
    }
}

/// Separable window operator on a `width × height` plane.
#[derive(Debug, Clone)]
struct Window {
    width: usize,
    height: usize,
    fx: AxisFilter,
    fy: AxisFilter,
}

impl Window {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            fx: AxisFilter::new(width),
            fy: AxisFilter::new(height),
        }
    }

    fn run(&self, plane: &[f64], transpose: bool) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut tmp = vec![0.0; w * h];
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            let dst = &mut tmp[y * w..(y + 1) * w];
            if transpose {
                self.fx.apply_transpose(row, 1, dst);
            } else {
                self.fx.apply(row, 1, dst);
            }
        }
        for x in 0..w {
            if transpose {
                self.fy.apply_transpose(&tmp[x..], w, &mut out[x..]);
            } else {
                self.fy.apply(&tmp[x..], w, &mut out[x..]);
            }
        }
        out
    }
}

fn plane(img: &Image, c: usize) -> Vec<f64> {
    img.data.iter().skip(c).step_by(3).copied().collect()
}

/// Mean SSIM over pixels and channels, optionally with its gradient w.r.t. `a`.
fn ssim_impl(a: &Image, b: &Image, want_grad: bool) -> Result<(f64, Option<Vec<f64>>), ImageError> {
    a.same_shape(b)?;
    let (w, h) = (a.width, a.height);
    let n = w * h;
    if n == 0 {
        return Ok((1.0, want_grad.then(Vec::new)));
    }
    let win = Window::new(w, h);
    let scale = 1.0 / (3 * n) as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| vec![0.0; a.data.len()]);
    for c in 0..3 {
        let pa = plane(a, c);
        let pb = plane(b, c);
        let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<f64>>();
        let mu_a = win.run(&pa, false);
        let mu_b = win.run(&pb, false);
        let saa = win.run(&sq(&pa, &pa), false);
        let sbb = win.run(&sq(&pb, &pb), false);
        let sab = win.run(&sq(&pa, &pb), false);
        let mut d_mu = vec![0.0; n];
        let mut d_saa = vec![0.0; n];
        let mut d_sab = vec![0.0; n];
        for p in 0..n {
            let (ma, mb) = (mu_a[p], mu_b[p]);
            let var_a = saa[p] - ma * ma;
            let var_b = sbb[p] - mb * mb;
            let cov = sab[p] - ma * mb;
            let a1 = 2.0 * ma * mb + SSIM_C1;
            let a2 = 2.0 * cov + SSIM_C2;
            let b1 = ma * ma + mb * mb + SSIM_C1;
            let b2 = var_a + var_b + SSIM_C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                let inv = 1.0 / (b1 * b2);
                let ds_dvar = -s / b2;
                let ds_dcov = 2.0 * a1 * inv;
                d_mu[p] = scale
                    * (2.0 * mb * a2 * inv - 2.0 * ma * s / b1 - 2.0 * ma * ds_dvar - mb * ds_dcov);
                d_saa[p] = scale * ds_dvar;
                d_sab[p] = scale * ds_dcov;
            }
        }
        if let Some(g) = grad.as_mut() {
            let t_mu = win.run(&d_mu, true);
            let t_saa = win.run(&d_saa, true);
            let t_sab = win.run(&d_sab, true);
            for p in 0..n {
                g[p * 3 + c] = t_mu[p] + 2.0 * pa[p] * t_saa[p] + pb[p] * t_sab[p];
            }
        }
    }
    Ok((total * scale, grad))
}

/// Mean windowed SSIM (11×11 Gaussian window, σ = 1.5, borders renormalized).
pub fn ssim(a: &Image, b: &Image) -> Result<f64, ImageError> {
    ssim_impl(a, b, false).map(|(s, _)| s)
}

/// SSIM and its gradient with respect to the pixels of `a`.
pub fn ssim_with_grad(a: &Image, b: &Image) -> Result<(f64, Vec<f64>), ImageError> {
    ssim_impl(a, b, true).map(|(s, g)| (s, g.expect("gradient requested")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub names: Vec<String>,
    /// `null` in JSON for identical pairs (infinite PSNR).
    pub psnr_per_image: Vec<f64>,
    pub ssim_per_image: Vec<f64>,
    pub psnr_mean: f64,
    pub psnr_am: f64,
    pub ssim_mean: f64,
}

/// Per-image and aggregate metrics for named `(rendered, reference)` pairs.
pub fn quality_report(
    pairs: &[(String, &Image, &Image)],
    max_value: f64,
) -> Result<QualityReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut psnrs = Vec::with_capacity(pairs.len());
    let mut ssims = Vec::with_capacity(pairs.len());
    for (_, a, b) in pairs {
        psnrs.push(psnr(a, b, max_value)?);
        ssims.push(ssim(a, b)?);
    }
    let refs: Vec<(&Image, &Image)> = pairs.iter().map(|(_, a, b)| (*a, *b)).collect();
    let n = pairs.len() as f64;
    Ok(QualityReport {
        names: pairs.iter().map(|(s, _, _)| s.clone()).collect(),
        psnr_mean: psnrs.iter().sum::<f64>() / n,
        psnr_am: psnr_am(&refs, max_value)?,
        ssim_mean: ssims.iter().sum::<f64>() / n,
        psnr_per_image: psnrs,
        ssim_per_image: ssims,
    })
}

/// Distribution of one codebook's assignments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodebookStats {
    pub k: usize,
    pub count: usize,
    /// Cluster sizes, largest first (all `k` codes, zeros included).
    pub histogram: Vec<u64>,
    pub used_codes: usize,
    pub max_share: f64,
    /// Empirical entropy of the assignments in bits.
    pub entropy_bits: f64,
    /// `count · entropy / 8`, a lower bound for any prefix code.
    pub estimated_entropy_coded_bytes: f64,
    /// Bytes of the fixed-width packed stream.
    pub packed_bytes: usize,
}

pub fn codebook_stats(assignments: &[u32], k: usize) -> CodebookStats {
    let mut histogram = vec![0u64; k];
    for &a in assignments {
        histogram[a as usize] += 1;
    }
    histogram.sort_unstable_by(|a, b| b.cmp(a));
    let n = assignments.len();
    let entropy_bits = if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        histogram
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.log2()
            })
            .sum::<f64>()
            .max(0.0)
    };
    CodebookStats {
        k,
        count: n,
        used_codes: histogram.iter().take_while(|&&c| c > 0).count(),
        max_share: if n == 0 {
            0.0
        } else {
            histogram.first().copied().unwrap_or(0) as f64 / n as f64
        },
        estimated_entropy_coded_bytes: n as f64 * entropy_bits / 8.0,
        packed_bytes: (n * index_bits(k) as usize).div_ceil(8),
        entropy_bits,
        histogram,
    }
}

/// Human-readable memory breakdown of a size report.
pub fn memory_breakdown(report: &SizeReport) -> String {
    let pct = |x: f64| format!("{:6.2}%", 100.0 * x);
    let mut s = String::new();
    s.push_str(&format!("index accounting   {:?}\n", report.accounting));
    s.push_str(&format!("gaussians          {}\n", report.count));
    s.push_str(&format!("header             {:>14} B\n", report.header));
    s.push_str(&format!("codebooks          {:>14} B\n", report.codebooks));
    s.push_str(&format!("run-length counts  {:>14} B\n", report.rle_counts));
    s.push_str(&format!(
        "packed indices     {:>14} B\n",
        report.packed_indices
    ));
    s.push_str(&format!("residuals          {:>14} B\n", report.residuals));
    s.push_str(&format!("total              {:>14} B\n", report.total));
    s.push_str(&format!(
        "non-quantized {}  quantized {}\n",
        pct(report.non_quantized_fraction),
        pct(report.quantized_fraction)
    ));
    s.push_str(&format!(
        "  of quantized: index {}  codebook {}\n",
        pct(report.index_share),
        pct(report.codebook_share)
    ));
    s
}
