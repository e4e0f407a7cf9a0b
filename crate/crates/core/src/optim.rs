//! Fitting RBF models with adaptive gradient methods.
//!
//! A fit runs `batch_runs` independent restarts, each from its own small
//! random initialization and its own RNG stream, and keeps the run with
//! the lowest final full-matrix MSE. Restarts run in parallel on the
//! current rayon pool; results do not depend on the thread count.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure_arg, Error, Result};
use crate::loss::{mse_loss, GradientSet, Workspace};
use crate::matrix::DenseMatrix;
use crate::model::{IndexSample, RbfModel};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    AdamW,
    Adagrad,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "adamw" => Ok(Self::AdamW),
            "adagrad" => Ok(Self::Adagrad),
            other => Err(Error::Argument(format!(
                "unknown optimizer {other:?} (expected adam, adamw or adagrad)"
            ))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Adam => "adam",
            Self::AdamW => "adamw",
            Self::Adagrad => "adagrad",
        })
    }
}

/// Hyperparameters for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub components: usize,
    pub symmetric: bool,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Number of independent restarts.
    pub batch_runs: usize,
    /// Standard deviation of the initial `u`, `v` entries.
    pub init_scale: f64,
    pub stochastic: bool,
    /// Entries per step in stochastic mode.
    pub minibatch_size: usize,
    /// AdamW only; applied to `u` and `v`.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop a run once its full MSE is at or below this.
    pub target_loss: Option<f64>,
    pub seed: u64,
    /// Iterations between recorded trajectory points (and between full-loss
    /// checks in stochastic mode).
    pub trace_stride: usize,
}

pub const DEFAULT_ITERS_PER_COMPONENT: usize = 10_000;

impl FitConfig {
    pub fn new(components: usize) -> Self {
        Self {
            components,
            symmetric: false,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.1,
            max_iters: DEFAULT_ITERS_PER_COMPONENT * components.max(1),
            batch_runs: 100,
            init_scale: 0.1,
            stochastic: false,
            minibatch_size: 0,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            target_loss: None,
            seed: 0,
            trace_stride: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate must be positive");
        ensure_arg!(self.max_iters >= 1, "max_iters must be at least 1");
        ensure_arg!(self.batch_runs >= 1, "batch_runs must be at least 1");
        ensure_arg!(self.init_scale > 0.0 && self.init_scale.is_finite(), "init_scale must be positive");
        ensure_arg!(!self.stochastic || self.minibatch_size >= 1, "minibatch_size must be at least 1 in stochastic mode");
        ensure_arg!(self.trace_stride >= 1, "trace_stride must be at least 1");
        ensure_arg!((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2), "betas must lie in [0, 1)");
        ensure_arg!(self.epsilon >= 0.0 && self.weight_decay >= 0.0, "epsilon and weight_decay must be nonnegative");
        Ok(())
    }
}

/// Outcome of a batch of restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub best_model: RbfModel,
    pub best_loss: f64,
    pub best_run: usize,
    /// Final full MSE of every run, `+inf` for diverged runs.
    pub per_run_final_losses: Vec<f64>,
    /// `(iteration, full MSE)` of the best run every `trace_stride` steps.
    pub loss_trajectory: Vec<(usize, f64)>,
    /// Steps taken by the best run.
    pub iterations_used: usize,
    pub seed: u64,
}

impl FitReport {
    pub fn diverged_runs(&self) -> usize {
        self.per_run_final_losses.iter().filter(|l| !l.is_finite()).count()
    }

    /// Fraction of runs whose final loss is strictly below `threshold`.
    pub fn success_fraction(&self, threshold: f64) -> f64 {
        let hits = self.per_run_final_losses.iter().filter(|&&l| l < threshold).count();
        hits as f64 / self.per_run_final_losses.len() as f64
    }
}

/// Random start: `u`, `v` entries ~ N(0, init_scale^2), `a` ~ N(0, 1), `b = 0`.
pub fn init_model(
    components: usize,
    n: usize,
    m: usize,
    symmetric: bool,
    init_scale: f64,
    rng: &mut impl Rng,
) -> Result<RbfModel> {
    ensure_arg!(n > 0 && m > 0, "dims must be positive");
    ensure_arg!(!symmetric || n == m, "symmetric model needs a square shape");
    let mut normal = |count: usize, scale: f64| -> Vec<f64> {
        (0..count).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let u = normal(components * n, init_scale);
    let v = if symmetric { Vec::new() } else { normal(components * m, init_scale) };
    let a = normal(components, 1.0);
    RbfModel::from_flat(components, n, m, u, v, a, 0.0, symmetric)
}

/// `size` distinct coordinates drawn uniformly from an `n x m` grid.
pub fn sample_minibatch(n: usize, m: usize, size: usize, rng: &mut impl Rng) -> Result<IndexSample> {
    let total = n * m;
    ensure_arg!(size >= 1 && size <= total, "minibatch size {size} outside [1, {total}]");
    let pairs = index::sample(rng, total, size)
        .into_iter()
        .map(|idx| (idx / m, idx % m))
        .collect();
    Ok(IndexSample::from_distinct(pairs))
}

/// Per-parameter state of an adaptive optimizer.
///
/// Parameters are addressed in the flat order `u, v, a, b`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    weight_decay: f64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: &FitConfig, model: &RbfModel) -> Self {
        let len = model.param_count();
        Self {
            kind: config.optimizer,
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            weight_decay: config.weight_decay,
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }

    /// Applies one update. `iteration` counts from 1.
    pub fn step(&mut self, model: &mut RbfModel, grads: &GradientSet, iteration: usize) -> Result<()> {
        ensure_arg!(iteration >= 1, "iteration counts from 1");
        if self.first.len() != model.param_count() || grads.components() != model.components() {
            return Err(Error::Shape("optimizer state does not match model".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let (du, dv, da, db) = grads.flat();
        let (u, v, a, b) = model.params_mut();
        let decay = self.kind == OptimizerKind::AdamW;
        let mut offset = 0;
        for (params, g, decayed) in [(u, du, decay), (v, dv, decay), (a, da, false)] {
            self.update(offset, params, g, decayed, iteration);
            offset += g.len();
        }
        self.update(offset, std::slice::from_mut(b), &[db], false, iteration);
        Ok(())
    }

    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64], decayed: bool, t: usize) {
        let first = &mut self.first[offset..offset + grads.len()];
        let second = &mut self.second[offset..offset + grads.len()];
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Adam | OptimizerKind::AdamW => {
                let (b1, b2) = (self.beta1, self.beta2);
                let c1 = 1.0 - b1.powi(t as i32);
                let c2 = 1.0 - b2.powi(t as i32);
                for ((p, &g), (m1, m2)) in params.iter_mut().zip(grads).zip(first.iter_mut().zip(second.iter_mut())) {
                    *m1 = b1 * *m1 + (1.0 - b1) * g;
                    *m2 = b2 * *m2 + (1.0 - b2) * g * g;
                    let step = (*m1 / c1) / ((*m2 / c2).sqrt() + self.epsilon);
                    if decayed {
                        *p -= lr * (step + self.weight_decay * *p);
                    } else {
                        *p -= lr * step;
                    }
                }
            }
            OptimizerKind::Adagrad => {
                for ((p, &g), acc) in params.iter_mut().zip(grads).zip(second.iter_mut()) {
                    *acc += g * g;
                    *p -= lr * g / (acc.sqrt() + self.epsilon);
                }
            }
        }
    }
}

struct RunOutcome {
    model: RbfModel,
    final_loss: f64,
    trajectory: Vec<(usize, f64)>,
    iterations: usize,
}

/// Fits an RBF model to `target` with `config.batch_runs` restarts.
pub fn fit(target: &DenseMatrix, config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    let (n, m) = target.shape();
    if config.symmetric && n != m {
        return Err(Error::Argument(format!("symmetric fit needs a square target, got {n}x{m}")));
    }
    if config.stochastic && config.minibatch_size > n * m {
        return Err(Error::Argument(format!(
            "minibatch size {} exceeds the {} matrix entries",
            config.minibatch_size,
            n * m
        )));
    }
    let outcomes: Vec<RunOutcome> = (0..config.batch_runs)
        .into_par_iter()
        .map(|run| run_one(target, config, run))
        .collect::<Result<_>>()?;

    let per_run_final_losses: Vec<f64> = outcomes.iter().map(|o| o.final_loss).collect();
    // Lowest loss wins, ties go to the lowest run index.
    let best_run = per_run_final_losses
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)))
        .map(|(i, _)| i)
        .expect("batch_runs >= 1");
    if !per_run_final_losses[best_run].is_finite() {
        return Err(Error::AllDiverged { runs: config.batch_runs });
    }
    let best = outcomes.into_iter().nth(best_run).expect("index in range");
    Ok(FitReport {
        best_model: best.model,
        best_loss: best.final_loss,
        best_run,
        per_run_final_losses,
        loss_trajectory: best.trajectory,
        iterations_used: best.iterations,
        seed: config.seed,
    })
}

fn run_one(target: &DenseMatrix, config: &FitConfig, run: usize) -> Result<RunOutcome> {
    let (n, m) = target.shape();
    let mut rng: StreamRng = rng::stream(config.seed, run as u64);
    let mut model = init_model(config.components, n, m, config.symmetric, config.init_scale, &mut rng)?;
    let mut state = OptimizerState::new(config, &model);
    let mut ws = Workspace::default();
    let mut grad = GradientSet::zeros_like(&model);
    let mut trajectory = Vec::new();
    let stride = config.trace_stride;
    let reached = |loss: f64| config.target_loss.is_some_and(|t| loss <= t);
    let diverged = |model: RbfModel, trajectory, iterations| RunOutcome {
        model,
        final_loss: f64::INFINITY,
        trajectory,
        iterations,
    };

    let mut steps = 0;
    while steps < config.max_iters {
        if config.stochastic {
            if steps % stride == 0 {
                let full = mse_loss(target, &model)?;
                trajectory.push((steps, full));
                if !full.is_finite() {
                    return Ok(diverged(model, trajectory, steps));
                }
                if reached(full) {
                    break;
                }
            }
            let sample = sample_minibatch(n, m, config.minibatch_size, &mut rng)?;
            let loss = ws.subset(target, &model, &sample, &mut grad);
            if !loss.is_finite() {
                return Ok(diverged(model, trajectory, steps));
            }
        } else {
            let loss = ws.full(target, &model, &mut grad);
            if steps % stride == 0 {
                trajectory.push((steps, loss));
            }
            if !loss.is_finite() {
                return Ok(diverged(model, trajectory, steps));
            }
            if reached(loss) {
                break;
            }
        }
        steps += 1;
        if state.step(&mut model, &grad, steps).is_err() || !model.all_finite() {
            return Ok(diverged(model, trajectory, steps));
        }
    }

    if !model.all_finite() {
        return Ok(diverged(model, trajectory, steps));
    }
    let final_loss = mse_loss(target, &model)?;
    if trajectory.last().is_none_or(|&(it, _)| it != steps) {
        trajectory.push((steps, final_loss));
    }
    let final_loss = if final_loss.is_finite() { final_loss } else { f64::INFINITY };
    Ok(RunOutcome { model, final_loss, trajectory, iterations: steps })
}
