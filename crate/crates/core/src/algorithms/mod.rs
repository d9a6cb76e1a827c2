//! Training loops for Ada-CVaR and the three baselines, output-iterate
//! selection and game-regret instrumentation.

mod objectives;
mod oracle;

pub use objectives::{batch_gradient, BatchGradient, BatchObjective};
pub use oracle::{cvar_oracle, game_regret, OracleSolution};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::learners::{dataset_losses, predict, LossSpec, ModelParams, OptimizerConfig, OptimizerState, ScalarOptimizer};
use crate::metrics::{evaluate, EvalMetrics};
use crate::risk::RiskLevel;
use crate::rng::{substream, uniform_index, Stream};
use crate::sampler::{LossEstimate, SamplerConfig, SamplerSnapshot, SamplerState};

/// Initial value of the threshold variable.
pub const ELL_INIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    AdaCvar,
    TruncCvar,
    SoftCvar,
    Mean,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::AdaCvar => "ada-cvar",
            Algorithm::TruncCvar => "trunc-cvar",
            Algorithm::SoftCvar => "soft-cvar",
            Algorithm::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterateSelection {
    /// `(1/T) sum_t theta_t`.
    #[default]
    Average,
    /// One iterate chosen uniformly at random.
    UniformRandom,
    Last,
}

/// Order of the two players within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOrder {
    /// Sampler observes `L_i(theta_t)` and updates, then the learner steps
    /// from `theta_t`. Iterates are the pre-step parameters.
    #[default]
    SamplerFirst,
    /// Learner steps first; the sampler observes the loss at the new
    /// parameters. Iterates are the post-step parameters.
    LearnerFirst,
}

/// Multiplies both learning rates by `factor` at the end of each listed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrDecay {
    pub factor: f64,
    pub milestones: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Rate of the threshold variable; defaults to the learner rate.
    #[serde(default)]
    pub lr_ell: Option<f64>,
    #[serde(default = "yes")]
    pub clamp_ell: bool,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_tau")]
    pub soft_tau: f64,
    pub seed: u64,
    #[serde(default)]
    pub iterate_selection: IterateSelection,
    #[serde(default)]
    pub order: StepOrder,
    /// Store `L(theta_t)` and `q_t` for every step.
    #[serde(default)]
    pub instrument_full_losses: bool,
    #[serde(default)]
    pub record_iterates: bool,
    #[serde(default)]
    pub record_steps: bool,
    /// Steps per epoch; epoch records are emitted only when set.
    #[serde(default)]
    pub epoch_length: Option<usize>,
    #[serde(default)]
    pub lr_decay: Option<LrDecay>,
    /// Return the epoch checkpoint with the lowest validation CVaR.
    #[serde(default)]
    pub early_stopping: bool,
}

fn yes() -> bool {
    true
}

fn default_tau() -> f64 {
    0.1
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, alpha: f64, steps: usize, seed: u64) -> Self {
        Self {
            algorithm,
            alpha,
            steps,
            batch_size: 1,
            optimizer: OptimizerConfig::sgd(0.01),
            lr_ell: None,
            clamp_ell: true,
            sampler: SamplerConfig::default(),
            soft_tau: default_tau(),
            seed,
            iterate_selection: IterateSelection::default(),
            order: StepOrder::default(),
            instrument_full_losses: false,
            record_iterates: false,
            record_steps: false,
            epoch_length: None,
            lr_decay: None,
            early_stopping: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        self.optimizer.validate()?;
        if let Some(lr) = self.lr_ell {
            if !(lr.is_finite() && lr >= 0.0) {
                return Err(Error::Config(format!("threshold rate {lr} must be nonnegative")));
            }
        }
        if self.algorithm == Algorithm::SoftCvar && !(self.soft_tau > 0.0 && self.soft_tau.is_finite()) {
            return Err(Error::Config(format!("soft temperature {} must be positive", self.soft_tau)));
        }
        if self.epoch_length == Some(0) {
            return Err(Error::Config("epoch length must be positive".into()));
        }
        if (self.lr_decay.is_some() || self.early_stopping) && self.epoch_length.is_none() {
            return Err(Error::Config("learning-rate decay and early stopping need an epoch length".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub indices: Vec<usize>,
    /// Sampling probability of each drawn index.
    pub q: Vec<f64>,
    pub losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    pub clipped: u32,
    /// The parameter gradient of this step was exactly zero.
    pub zero_grad: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: usize,
    pub train: EvalMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<EvalMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    /// Parameters the metrics were computed at.
    pub params: ModelParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllSummary {
    pub initial: f64,
    pub last: f64,
    pub min: f64,
    pub max: f64,
}

impl EllSummary {
    fn new(v: f64) -> Self {
        Self {
            initial: v,
            last: v,
            min: v,
            max: v,
        }
    }

    fn observe(&mut self, v: f64) {
        self.last = v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub steps_run: usize,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// `theta_t`, `t = 1..T` (only with `record_iterates`).
    pub iterates: Vec<ModelParams>,
    /// `L(theta_t)` (only with `instrument_full_losses`).
    pub full_losses: Vec<Vec<f64>>,
    /// `q_t` (only with `instrument_full_losses`).
    pub q_history: Vec<Vec<f64>>,
    pub zero_grad_steps: usize,
    pub clip_events: u64,
    pub ell: Option<EllSummary>,
    /// Zero-based index of the iterate picked by uniform-random selection.
    pub selected_step: Option<usize>,
    /// Epoch whose checkpoint was returned by early stopping.
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Output parameters per the iterate-selection mode.
    pub params: ModelParams,
    pub last: ModelParams,
    pub ell: Option<f64>,
    pub trace: RunTrace,
    pub sampler: Option<SamplerSnapshot>,
}

/// Runs the algorithm named in `config`.
pub fn train(data: &Dataset, val: Option<&Dataset>, loss: &LossSpec, config: &TrainConfig) -> Result<TrainOutput> {
    run(config.algorithm, data, val, loss, config)
}

pub fn train_ada_cvar(data: &Dataset, loss: &LossSpec, config: &TrainConfig) -> Result<TrainOutput> {
    run(Algorithm::AdaCvar, data, None, loss, config)
}

pub fn train_trunc_cvar(data: &Dataset, loss: &LossSpec, config: &TrainConfig) -> Result<TrainOutput> {
    run(Algorithm::TruncCvar, data, None, loss, config)
}

pub fn train_soft_cvar(data: &Dataset, loss: &LossSpec, config: &TrainConfig) -> Result<TrainOutput> {
    run(Algorithm::SoftCvar, data, None, loss, config)
}

pub fn train_mean(data: &Dataset, loss: &LossSpec, config: &TrainConfig) -> Result<TrainOutput> {
    run(Algorithm::Mean, data, None, loss, config)
}

/// Online form of the iterate selection.
struct OutputTracker {
    mode: IterateSelection,
    sum: ModelParams,
    count: usize,
    target: Option<usize>,
    picked: Option<ModelParams>,
    last: Option<ModelParams>,
}

impl OutputTracker {
    fn observe(&mut self, t: usize, p: &ModelParams) {
        for (s, v) in self.sum.theta.iter_mut().zip(&p.theta) {
            *s += v;
        }
        self.sum.bias += p.bias;
        self.count += 1;
        if self.target == Some(t) {
            self.picked = Some(p.clone());
        }
        if self.mode == IterateSelection::Last {
            self.last = Some(p.clone());
        }
    }

    fn average(&self) -> Option<ModelParams> {
        (self.count > 0).then(|| {
            let c = self.count as f64;
            ModelParams {
                theta: self.sum.theta.iter().map(|v| v / c).collect(),
                bias: self.sum.bias / c,
            }
        })
    }

    /// Output so far; `current` stands in before any iterate or for
    /// modes without an online form.
    fn current(&self, current: &ModelParams) -> ModelParams {
        match self.mode {
            IterateSelection::Average => self.average().unwrap_or_else(|| current.clone()),
            _ => current.clone(),
        }
    }

    fn finish(self, current: &ModelParams) -> ModelParams {
        match self.mode {
            IterateSelection::Average => self.average().unwrap_or_else(|| current.clone()),
            IterateSelection::UniformRandom => self.picked.unwrap_or_else(|| current.clone()),
            IterateSelection::Last => self.last.unwrap_or_else(|| current.clone()),
        }
    }
}

fn run(
    algorithm: Algorithm,
    data: &Dataset,
    val: Option<&Dataset>,
    loss: &LossSpec,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    if config.early_stopping && val.is_none() {
        return Err(Error::Config("early stopping needs a validation set".into()));
    }
    let n = data.len();
    let d = data.dim();
    let b = config.batch_size;
    let alpha = config.alpha;
    let uses_ell = matches!(algorithm, Algorithm::TruncCvar | Algorithm::SoftCvar);

    let mut sampler = match algorithm {
        Algorithm::AdaCvar => {
            let level = RiskLevel::new(alpha, n)?;
            let mut cfg = config.sampler;
            if cfg.horizon.is_none() {
                cfg.horizon = Some(config.steps);
            }
            Some(SamplerState::new(n, &level, cfg)?)
        }
        _ => None,
    };

    let mut params = ModelParams::zeros(d);
    let mut opt = OptimizerState::new(config.optimizer, d)?;
    let mut ell = ELL_INIT;
    let mut ell_opt = ScalarOptimizer::new(config.optimizer.kind, config.lr_ell.unwrap_or(config.optimizer.lr));
    let mut ell_lr = config.lr_ell.unwrap_or(config.optimizer.lr);
    let mut lr = config.optimizer.lr;

    let mut draws = substream(config.seed, Stream::Draws);
    let target = match (config.iterate_selection, config.steps) {
        (IterateSelection::UniformRandom, t) if t > 0 => Some(substream(config.seed, Stream::Select).random_range(0..t)),
        _ => None,
    };
    let mut tracker = OutputTracker {
        mode: config.iterate_selection,
        sum: ModelParams::zeros(d),
        count: 0,
        target,
        picked: None,
        last: None,
    };
    let mut trace = RunTrace {
        ell: uses_ell.then(|| EllSummary::new(ell)),
        selected_step: target,
        ..RunTrace::default()
    };
    let mut best: Option<(f64, ModelParams, usize)> = None;
    let uniform_q = 1.0 / n as f64;

    let mut indices = vec![0usize; b];
    let mut q_at = vec![uniform_q; b];
    for t in 0..config.steps {
        // draws: exactly b uniforms per step for every algorithm
        match sampler.as_mut() {
            Some(s) => {
                for j in 0..b {
                    let u: f64 = draws.random();
                    indices[j] = s.draw(u)?;
                }
                let q = s.distribution()?.values();
                for j in 0..b {
                    q_at[j] = q[indices[j]];
                }
            }
            None => {
                for idx in indices.iter_mut() {
                    *idx = uniform_index(draws.random(), n);
                }
            }
        }
        let objective = match algorithm {
            Algorithm::AdaCvar | Algorithm::Mean => BatchObjective::Mean,
            Algorithm::TruncCvar => BatchObjective::Trunc { ell, alpha },
            Algorithm::SoftCvar => BatchObjective::Soft {
                ell,
                alpha,
                tau: config.soft_tau,
            },
        };
        let learner_first = config.order == StepOrder::LearnerFirst;

        let mut record_iterate = |p: &ModelParams, s: Option<&mut SamplerState>, trace: &mut RunTrace| -> Result<()> {
            tracker.observe(t, p);
            if config.record_iterates {
                trace.iterates.push(p.clone());
            }
            if config.instrument_full_losses {
                trace.full_losses.push(dataset_losses(p, data, loss)?.into_inner());
                trace.q_history.push(match s {
                    Some(s) => s.distribution()?.values().to_vec(),
                    None => vec![uniform_q; n],
                });
            }
            Ok(())
        };

        if !learner_first {
            record_iterate(&params, sampler.as_mut(), &mut trace)?;
        }
        let bg = batch_gradient(&objective, &params, data, &indices, loss)?;
        let mut clipped = 0;
        if !learner_first {
            if let Some(s) = sampler.as_mut() {
                clipped = sampler_update(s, &indices, &bg.losses, &q_at)?;
            }
        }
        opt.step(&mut params, &bg.grad, bg.grad_bias)?;
        if uses_ell {
            ell_opt.step(&mut ell, bg.grad_ell);
            if config.clamp_ell {
                ell = ell.clamp(0.0, 1.0);
            }
        }
        if !params.is_finite() || !ell.is_finite() {
            return Err(Error::Numeric { step: t + 1 });
        }
        if learner_first {
            // the cached distribution is still the q_t this step was drawn from
            record_iterate(&params, sampler.as_mut(), &mut trace)?;
            if let Some(s) = sampler.as_mut() {
                let post: Vec<f64> = indices
                    .iter()
                    .map(|&i| loss.value(predict(&params, data.row(i))?, data.target(i)))
                    .collect::<Result<_>>()?;
                clipped = sampler_update(s, &indices, &post, &q_at)?;
            }
        }

        let zero = bg.is_zero();
        trace.zero_grad_steps += usize::from(zero);
        trace.clip_events += u64::from(clipped);
        if let Some(e) = trace.ell.as_mut() {
            e.observe(ell);
        }
        if config.record_steps {
            trace.steps.push(StepRecord {
                step: t + 1,
                indices: indices.clone(),
                q: q_at.clone(),
                losses: bg.losses.clone(),
                ell: uses_ell.then_some(ell),
                clipped,
                zero_grad: zero,
            });
        }
        trace.steps_run = t + 1;

        if let Some(len) = config.epoch_length {
            if (t + 1) % len == 0 {
                let epoch = (t + 1) / len;
                let candidate = tracker.current(&params);
                let train_m = evaluate(&candidate, data, loss, alpha)?;
                let val_m = val.map(|v| evaluate(&candidate, v, loss, alpha)).transpose()?;
                if config.early_stopping {
                    let score = val_m.as_ref().expect("validated").cvar;
                    if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                        best = Some((score, candidate.clone(), epoch));
                    }
                }
                trace.epochs.push(EpochRecord {
                    epoch,
                    step: t + 1,
                    train: train_m,
                    val: val_m,
                    ell: uses_ell.then_some(ell),
                    params: candidate,
                });
                if let Some(decay) = &config.lr_decay {
                    if decay.milestones.contains(&epoch) {
                        lr *= decay.factor;
                        ell_lr *= decay.factor;
                        opt.set_lr(lr);
                        ell_opt.set_lr(ell_lr);
                    }
                }
            }
        }
    }

    let mut output = tracker.finish(&params);
    if let Some((_, p, epoch)) = best {
        output = p;
        trace.best_epoch = Some(epoch);
    }
    Ok(TrainOutput {
        params: output,
        last: params,
        ell: uses_ell.then_some(ell),
        trace,
        sampler: sampler.map(|s| s.snapshot()),
    })
}

fn sampler_update(s: &mut SamplerState, indices: &[usize], losses: &[f64], q_at: &[f64]) -> Result<u32> {
    let estimates = indices
        .iter()
        .zip(losses)
        .zip(q_at)
        .map(|((&i, &l), &q)| LossEstimate::new(i, l, q))
        .collect::<Result<Vec<_>>>()?;
    s.update_batch(&estimates)
}

/// Picks the output parameters from recorded iterates.
pub fn select_output<R: Rng + ?Sized>(trace: &RunTrace, mode: IterateSelection, rng: &mut R) -> Result<ModelParams> {
    let its = &trace.iterates;
    let first = its.first().ok_or_else(|| invalid("trace holds no iterates"))?;
    Ok(match mode {
        IterateSelection::Last => its[its.len() - 1].clone(),
        IterateSelection::UniformRandom => its[rng.random_range(0..its.len())].clone(),
        IterateSelection::Average => {
            let c = its.len() as f64;
            let mut sum = ModelParams::zeros(first.dim());
            for p in its {
                for (s, v) in sum.theta.iter_mut().zip(&p.theta) {
                    *s += v;
                }
                sum.bias += p.bias;
            }
            ModelParams {
                theta: sum.theta.iter().map(|v| v / c).collect(),
                bias: sum.bias / c,
            }
        }
    })
}
