use std::io::{self, Write};

use super::loss::loss;
use super::render::{render, render_backward};
use super::scene::{sigmoid, Scene2D};
use crate::image::{Image, ImageError};
use crate::matrix::Matrix;
use crate::metrics::psnr;
use crate::vq::{lloyd, qat_update, AssignSchedule, Codebook, Init, KMeansParams, VqError};

/// Training timeline. Fractions are of `total_iters` and rounded to the nearest step.
#[derive(Debug, Clone, PartialEq)]
pub struct QatSchedule {
    pub total_iters: usize,
    /// Steps from here on render through the codebooks.
    pub qat_start: f64,
    pub assign_every: usize,
    /// Last step at which assignments may be refreshed.
    pub assign_until: f64,
    pub reg_lambda: f64,
    pub reg_start: f64,
    pub reg_end: f64,
    pub prune_every: usize,
    pub min_opacity: f64,
}

impl QatSchedule {
    /// The 30K-iteration 3DGS timeline with λ = 1e-7.
    pub fn full() -> Self {
        Self {
            total_iters: 30_000,
            qat_start: 2.0 / 3.0,
            assign_every: 100,
            assign_until: 5.0 / 6.0,
            reg_lambda: 1e-7,
            reg_start: 0.5,
            reg_end: 2.0 / 3.0,
            prune_every: 1000,
            min_opacity: 0.005,
        }
    }

    /// Same fractions compressed to `total_iters`, with a toy-scale λ.
    pub fn toy(total_iters: usize) -> Self {
        Self {
            total_iters,
            assign_every: (total_iters / 300).max(1),
            reg_lambda: 1e-4,
            prune_every: (total_iters / 30).max(1),
            ..Self::full()
        }
    }

    /// Plain fitting: no quantization, no regularization, no pruning.
    pub fn unquantized(total_iters: usize) -> Self {
        Self {
            qat_start: 1.0,
            assign_until: 1.0,
            reg_lambda: 0.0,
            prune_every: 0,
            ..Self::toy(total_iters)
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = (0.0..=1.0).contains(&self.qat_start)
            && self.qat_start <= self.assign_until
            && self.assign_until <= 1.0
            && (0.0..=1.0).contains(&self.reg_start)
            && self.reg_start <= self.reg_end
            && self.reg_end <= 1.0
            && self.reg_lambda >= 0.0
            && self.min_opacity > 0.0
            && self.min_opacity < 1.0;
        if ok {
            Ok(())
        } else {
            Err(TrainError::Schedule(format!("{self:?}")))
        }
    }

    fn at(&self, fraction: f64) -> usize {
        (fraction * self.total_iters as f64).round() as usize
    }

    pub fn quantized_at(&self, step: usize) -> bool {
        self.qat_start < 1.0 && step >= self.at(self.qat_start)
    }

    pub fn regularized_at(&self, step: usize) -> bool {
        self.at(self.reg_start) <= step && step < self.at(self.reg_end)
    }

    /// Whether to prune once `done` steps have completed: every `prune_every`
    /// steps inside the regularization window, and once more when it closes.
    pub fn prunes_after(&self, done: usize) -> bool {
        let (lo, hi) = (self.at(self.reg_start), self.at(self.reg_end));
        self.prune_every > 0
            && lo < done
            && done <= hi
            && (done.is_multiple_of(self.prune_every) || done == hi)
    }

    pub fn assign_schedule(&self) -> AssignSchedule {
        AssignSchedule {
            assign_every: self.assign_every,
            assign_until: self.at(self.assign_until),
        }
    }
}

impl Default for QatSchedule {
    fn default() -> Self {
        Self::toy(2000)
    }
}

/// Step sizes per parameter class.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRates {
    pub position: f64,
    pub log_scale: f64,
    pub angle: f64,
    pub logit_opacity: f64,
    pub color: f64,
}

impl LearningRates {
    fn as_array(&self) -> [f64; 5] {
        [
            self.position,
            self.log_scale,
            self.angle,
            self.logit_opacity,
            self.color,
        ]
    }
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 0.05,
            log_scale: 0.02,
            angle: 0.02,
            logit_opacity: 0.05,
            color: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

/// Codebook sizes for the three quantized 2D groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Vq2dConfig {
    pub k_color: usize,
    pub k_scale: usize,
    pub k_angle: usize,
    pub init: Init,
    pub seed: u64,
    /// Lloyd iterations when codebooks are first built.
    pub lloyd_iters: usize,
}

impl Vq2dConfig {
    pub fn uniform(k: usize) -> Self {
        Self {
            k_color: k,
            k_scale: k,
            k_angle: k,
            ..Self::default()
        }
    }
}

impl Default for Vq2dConfig {
    fn default() -> Self {
        Self {
            k_color: 256,
            k_scale: 256,
            k_angle: 64,
            init: Init::KMeansPlusPlus,
            seed: 0,
            lloyd_iters: 30,
        }
    }
}

/// Color (3), scale (2) and angle (1) codebooks over the same Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneCodebooks {
    pub color: Codebook<f64>,
    pub scale: Codebook<f64>,
    pub angle: Codebook<f64>,
}

impl SceneCodebooks {
    pub fn build(scene: &Scene2D, config: &Vq2dConfig) -> Result<Self, VqError> {
        let [color, scale, angle] = group_data(scene);
        let run = |data: &Matrix<f64>, k: usize, salt: u64| {
            let params = KMeansParams {
                init: config.init,
                seed: config.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                ..KMeansParams::new(k, config.lloyd_iters)
            };
            lloyd(data.view(), &params).map(|r| r.codebook)
        };
        Ok(Self {
            color: run(&color, config.k_color, 1)?,
            scale: run(&scale, config.k_scale, 2)?,
            angle: run(&angle, config.k_angle, 3)?,
        })
    }

    fn books_mut(&mut self) -> [&mut Codebook<f64>; 3] {
        [&mut self.color, &mut self.scale, &mut self.angle]
    }

    fn retain_rows(&mut self, keep: &[usize]) {
        for b in self.books_mut() {
            b.retain_rows(keep);
        }
    }
}

fn group_data(scene: &Scene2D) -> [Matrix<f64>; 3] {
    let m = scene.len();
    [
        Matrix::from_vec(m, 3, scene.color.as_flattened().to_vec()),
        Matrix::from_vec(m, 2, scene.log_scale.as_flattened().to_vec()),
        Matrix::from_vec(m, 1, scene.angle.clone()),
    ]
}

/// The scene with color, scale and angle replaced by their centroids.
pub fn quantized_view(scene: &Scene2D, books: &SceneCodebooks) -> Scene2D {
    let mut view = scene.clone();
    for i in 0..scene.len() {
        let c = books.color.code(i);
        view.color[i] = [c[0], c[1], c[2]];
        let s = books.scale.code(i);
        view.log_scale[i] = [s[0], s[1]];
        view.angle[i] = books.angle.code(i)[0];
    }
    view
}

/// Lloyd quantization of an already trained scene.
pub fn post_train_quantize(
    scene: &Scene2D,
    config: &Vq2dConfig,
) -> Result<(Scene2D, SceneCodebooks), VqError> {
    let books = SceneCodebooks::build(scene, config)?;
    Ok((quantized_view(scene, &books), books))
}

/// Removes Gaussians with opacity below `min_opacity` from the scene and from
/// every assignment vector. Returns the surviving original indices.
pub fn prune(
    scene: &mut Scene2D,
    codebooks: Option<&mut SceneCodebooks>,
    min_opacity: f64,
) -> Vec<usize> {
    let keep: Vec<usize> = (0..scene.len())
        .filter(|&i| sigmoid(scene.logit_opacity[i]) >= min_opacity)
        .collect();
    if keep.len() != scene.len() {
        *scene = scene.select(&keep);
        if let Some(books) = codebooks {
            books.retain_rows(&keep);
        }
    }
    keep
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no target images")]
    NoTargets,
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Vq(#[from] VqError),
}

/// Everything that evolves during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Non-quantized parameters.
    pub scene: Scene2D,
    pub codebooks: Option<SceneCodebooks>,
    first_moment: Scene2D,
    second_moment: Scene2D,
    updates: u64,
}

impl TrainState {
    pub fn new(scene: Scene2D) -> Self {
        let m = scene.len();
        Self {
            scene,
            codebooks: None,
            first_moment: Scene2D::zeros(m),
            second_moment: Scene2D::zeros(m),
            updates: 0,
        }
    }

    /// [`prune`] that also drops the optimizer moments of removed Gaussians.
    pub fn prune(&mut self, min_opacity: f64) -> Vec<usize> {
        let before = self.scene.len();
        let keep = prune(&mut self.scene, self.codebooks.as_mut(), min_opacity);
        if keep.len() != before {
            self.first_moment = self.first_moment.select(&keep);
            self.second_moment = self.second_moment.select(&keep);
        }
        keep
    }

    fn apply(&mut self, grads: &Scene2D, lr: &LearningRates, optimizer: Optimizer) {
        self.updates += 1;
        let rates = lr.as_array();
        let params = self.scene.classes_mut();
        let grads = grads.classes();
        match optimizer {
            Optimizer::Sgd => {
                for c in 0..5 {
                    for (p, g) in params[c].iter_mut().zip(grads[c]) {
                        *p -= rates[c] * g;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = self.updates as i32;
                let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                let m1 = self.first_moment.classes_mut();
                let m2 = self.second_moment.classes_mut();
                for (c, (((p, g), m), v)) in
                    params.into_iter().zip(grads).zip(m1).zip(m2).enumerate()
                {
                    for j in 0..p.len() {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                        v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                        p[j] -= rates[c] * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Fixed settings of a training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainConfig {
    pub schedule: QatSchedule,
    pub vq: Vq2dConfig,
    pub lr: LearningRates,
    pub optimizer: Optimizer,
    /// Trace interval in steps (0 traces only the final state).
    pub trace_every: usize,
}

/// What one [`ste_step`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    /// PSNR of the rendered view before the update.
    pub psnr: f64,
    /// Whether the codebook view was built and rendered.
    pub quantized: bool,
    pub reassigned: bool,
    /// Gradients at the rendered (possibly quantized) parameters.
    pub view_grads: Scene2D,
    /// Gradients handed to the optimizer for the non-quantized parameters.
    pub applied_grads: Scene2D,
}

/// One training step at `step` against `target`.
pub fn ste_step(
    state: &mut TrainState,
    target: &Image,
    config: &TrainConfig,
    step: usize,
) -> Result<StepOutcome, TrainError> {
    let sched = &config.schedule;
    let quantized = sched.quantized_at(step) && !state.scene.is_empty();
    if quantized && state.codebooks.is_none() {
        state.codebooks = Some(SceneCodebooks::build(&state.scene, &config.vq)?);
    }
    let view = match (&state.codebooks, quantized) {
        (Some(books), true) => Some(quantized_view(&state.scene, books)),
        _ => None,
    };
    let rendered_scene = view.as_ref().unwrap_or(&state.scene);
    let (w, h) = (target.width, target.height);
    let img = render(rendered_scene, w, h);
    let lambda = if sched.regularized_at(step) {
        sched.reg_lambda
    } else {
        0.0
    };
    let out = loss(&img, target, rendered_scene, lambda)?;
    let mut view_grads = render_backward(rendered_scene, w, h, &out.image_grad);
    for (g, r) in view_grads.logit_opacity.iter_mut().zip(&out.opacity_grad) {
        *g += r;
    }
    // Straight-through: centroid gradients go unchanged to the shadow parameters.
    let applied_grads = view_grads.clone();
    state.apply(&applied_grads, &config.lr, config.optimizer);
    let mut reassigned = false;
    if quantized {
        let schedule = sched.assign_schedule();
        let data = group_data(&state.scene);
        let books = state.codebooks.as_mut().expect("built above");
        for (book, d) in books.books_mut().into_iter().zip(&data) {
            reassigned |= qat_update(book, d.view(), step, &schedule).reassigned;
        }
    }
    Ok(StepOutcome {
        loss: out.total,
        psnr: psnr(&img, target, 1.0)?,
        quantized,
        reassigned,
        view_grads,
        applied_grads,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub loss: f64,
    pub psnr: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub scene: Scene2D,
    pub codebooks: Option<SceneCodebooks>,
    pub trace: Vec<TraceRow>,
    /// Loss of every step.
    pub losses: Vec<f64>,
    /// PSNR of the final (quantized, if active) render against the first target.
    pub final_psnr: f64,
}

impl TrainResult {
    /// The scene as it renders: quantized when codebooks exist.
    pub fn rendered_scene(&self) -> Scene2D {
        match &self.codebooks {
            Some(b) => quantized_view(&self.scene, b),
            None => self.scene.clone(),
        }
    }
}

/// Runs [`ste_step`] for the whole schedule, cycling through `targets`.
pub fn train(
    targets: &[Image],
    init: Scene2D,
    config: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    let first = targets.first().ok_or(TrainError::NoTargets)?;
    for t in targets {
        first.same_shape(t)?;
    }
    config.schedule.validate()?;
    let sched = &config.schedule;
    let mut state = TrainState::new(init);
    let mut trace = Vec::new();
    let mut losses = Vec::with_capacity(sched.total_iters);
    for step in 0..sched.total_iters {
        let out = ste_step(&mut state, &targets[step % targets.len()], config, step)?;
        losses.push(out.loss);
        if config.trace_every > 0 && step % config.trace_every == 0 {
            trace.push(TraceRow {
                iter: step,
                loss: out.loss,
                psnr: out.psnr,
                count: state.scene.len(),
            });
        }
        if sched.prunes_after(step + 1) {
            let before = state.scene.len();
            state.prune(sched.min_opacity);
            log::debug!(
                "step {}: pruned {} Gaussians",
                step + 1,
                before - state.scene.len()
            );
        }
    }
    let mut result = TrainResult {
        scene: state.scene,
        codebooks: state.codebooks,
        trace,
        losses,
        final_psnr: 0.0,
    };
    let img = render(&result.rendered_scene(), first.width, first.height);
    result.final_psnr = psnr(&img, first, 1.0)?;
    let out = loss(&img, first, &result.scene, 0.0)?;
    result.trace.push(TraceRow {
        iter: sched.total_iters,
        loss: out.total,
        psnr: result.final_psnr,
        count: result.scene.len(),
    });
    Ok(result)
}

/// Writes `iter,loss,psnr,count` CSV.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut w: W) -> io::Result<()> {
    writeln!(w, "iter,loss,psnr,count")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.iter, r.loss, r.psnr, r.count)?;
    }
    Ok(())
}
