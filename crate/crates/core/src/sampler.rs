//! The sampler (q-player): exponential weights on individual examples,
//! mapped to a distribution over examples through the marginals of a
//! diagonal k-DPP, mixed with the uniform distribution.
//!
//! Each round the sampler plays `q_t = (1 - gamma) P_w / k + gamma / N`,
//! draws an index `i ~ q_t`, observes only `L_i` and multiplies `w_i` by
//! `exp(eta * L_i / q_{t,i})`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kdpp::{approx_marginals, exact_marginals, LogWeightVector, SumTree};
use crate::risk::{top_k_sum, DroWeights, LossVector, RiskLevel};
use crate::rng::uniform_index;

/// Populations up to this size use exact marginals; larger ones the matched-DPP
/// approximation.
pub const EXACT_MARGINALS_MAX_N: usize = 64;

/// Cap on the exponent of a single multiplicative update.
pub const MAX_UPDATE_EXPONENT: f64 = 80.0;

/// Learning-rate schedule of the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EtaSchedule {
    /// `eta0` at every step.
    Constant { eta0: f64 },
    /// `sqrt(ln N / (N T))` for a known horizon `T`.
    FixedHorizon,
    /// `eta0 / sqrt(t)`.
    InverseSqrt { eta0: f64 },
    /// `eta0 / sqrt(1 + G_i)` where `G_i` accumulates squared importance
    /// weighted estimates at the sampled index.
    Adaptive { eta0: f64 },
}

impl EtaSchedule {
    /// Rate at step `t >= 1`; `accum` is the adaptive accumulator of the
    /// index being updated and is ignored by the other schedules.
    pub fn eta(&self, t: usize, n: usize, horizon: Option<usize>, accum: f64) -> Result<f64> {
        if t == 0 {
            return Err(invalid("steps are numbered from 1"));
        }
        Ok(match *self {
            EtaSchedule::Constant { eta0 } => eta0,
            EtaSchedule::FixedHorizon => {
                let horizon = horizon.ok_or_else(|| {
                    Error::Config("fixed-horizon schedule requires a horizon".into())
                })?;
                ((n as f64).ln() / (n as f64 * horizon as f64)).sqrt()
            }
            EtaSchedule::InverseSqrt { eta0 } => eta0 / (t as f64).sqrt(),
            EtaSchedule::Adaptive { eta0 } => eta0 / (1.0 + accum).sqrt(),
        })
    }
}

/// Step size of `schedule` at step `t` for a population of `n`.
pub fn eta_at(schedule: &EtaSchedule, t: usize, n: usize, horizon: Option<usize>) -> Result<f64> {
    schedule.eta(t, n, horizon, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub schedule: EtaSchedule,
    /// Weight of the uniform distribution in the played mixture.
    pub gamma: f64,
    /// Total number of updates, required by the fixed-horizon schedule.
    pub horizon: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            schedule: EtaSchedule::Constant { eta0: 0.1 },
            gamma: 0.01,
            horizon: None,
        }
    }
}

/// Importance-weighted feedback for one sampled index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    pub index: usize,
    pub raw_loss: f64,
    pub q_at_index: f64,
}

impl LossEstimate {
    pub fn new(index: usize, raw_loss: f64, q_at_index: f64) -> Result<Self> {
        if !(q_at_index > 0.0 && q_at_index <= 1.0) {
            return Err(invalid(format!("q at index must lie in (0, 1], got {q_at_index}")));
        }
        if !(0.0..=1.0).contains(&raw_loss) {
            return Err(invalid(format!("loss {raw_loss} outside [0, 1]")));
        }
        Ok(Self {
            index,
            raw_loss,
            q_at_index,
        })
    }

    /// `L_i / q_i`.
    pub fn importance_weighted(&self) -> f64 {
        self.raw_loss / self.q_at_index
    }
}

#[derive(Debug, Clone)]
struct Played {
    q: DroWeights,
    /// `None` when `q` is exactly uniform.
    tree: Option<SumTree>,
}

/// Serializable summary of a sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSnapshot {
    pub log_weights: Vec<f64>,
    pub t: usize,
    pub clip_events: u64,
}

#[derive(Debug, Clone)]
pub struct SamplerState {
    weights: LogWeightVector,
    k: usize,
    t: usize,
    config: SamplerConfig,
    grad_sq_accum: Vec<f64>,
    played: Option<Played>,
    clip_events: u64,
}

impl SamplerState {
    /// Uniform weights; the first played distribution is uniform.
    pub fn new(n: usize, level: &RiskLevel, config: SamplerConfig) -> Result<Self> {
        if n == 0 || level.n() != n {
            return Err(invalid(format!("risk level is for N = {}, sampler has N = {n}", level.n())));
        }
        if !(0.0..1.0).contains(&config.gamma) {
            return Err(Error::Config(format!("gamma = {} outside [0, 1)", config.gamma)));
        }
        if let EtaSchedule::FixedHorizon = config.schedule {
            if config.horizon.is_none() {
                return Err(Error::Config("fixed-horizon schedule requires a horizon".into()));
            }
        }
        Ok(Self {
            weights: LogWeightVector::ones(n),
            k: level.k(),
            t: 1,
            config,
            grad_sq_accum: vec![0.0; n],
            played: None,
            clip_events: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Index of the next update (starts at 1).
    pub fn step(&self) -> usize {
        self.t
    }

    pub fn clip_events(&self) -> u64 {
        self.clip_events
    }

    pub fn weights(&self) -> &LogWeightVector {
        &self.weights
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn snapshot(&self) -> SamplerSnapshot {
        SamplerSnapshot {
            log_weights: self.weights.log_weights().to_vec(),
            t: self.t,
            clip_events: self.clip_events,
        }
    }

    /// The distribution played at the current step (cached until the next update).
    pub fn distribution(&mut self) -> Result<&DroWeights> {
        if self.played.is_none() {
            self.played = Some(self.compute()?);
        }
        Ok(&self.played.as_ref().expect("just computed").q)
    }

    fn compute(&self) -> Result<Played> {
        let n = self.n();
        if self.k == n {
            // a size-N subset is forced: marginals are identically one
            return Ok(Played {
                q: DroWeights::uniform(n, self.k),
                tree: None,
            });
        }
        let marginals = if n <= EXACT_MARGINALS_MAX_N {
            exact_marginals(&self.weights, self.k)?
        } else {
            approx_marginals(&self.weights, self.k)?
        };
        let gamma = self.config.gamma;
        let kf = self.k as f64;
        let mut q: Vec<f64> = marginals
            .values()
            .iter()
            .map(|p| (1.0 - gamma) * p / kf + gamma / n as f64)
            .collect();
        let total: f64 = q.iter().sum();
        let cap = 1.0 / kf;
        for v in &mut q {
            *v = (*v / total).min(cap);
        }
        let tree = SumTree::build(&q)?;
        Ok(Played {
            q: DroWeights::new(q, self.k)?,
            tree: Some(tree),
        })
    }

    /// Draws an index from the current distribution using `u` in [0, 1).
    pub fn draw(&mut self, u: f64) -> Result<usize> {
        self.distribution()?;
        let played = self.played.as_ref().expect("computed above");
        match &played.tree {
            Some(tree) => tree.sample(u),
            None => {
                if !(0.0..1.0).contains(&u) {
                    return Err(invalid(format!("u = {u} outside [0, 1)")));
                }
                Ok(uniform_index(u, self.n()))
            }
        }
    }

    /// Applies one update; returns the number of clipped exponents.
    pub fn update(&mut self, est: &LossEstimate) -> Result<u32> {
        self.update_batch(std::slice::from_ref(est))
    }

    /// Applies the updates of a mini-batch drawn from one distribution.
    /// The step counter advances once.
    pub fn update_batch(&mut self, estimates: &[LossEstimate]) -> Result<u32> {
        let n = self.n();
        let mut clipped = 0;
        for est in estimates {
            if est.index >= n {
                return Err(invalid(format!("index {} out of range for N = {n}", est.index)));
            }
            if !(est.q_at_index > 0.0) {
                return Err(invalid("q at index must be positive"));
            }
            let value = est.importance_weighted();
            if let EtaSchedule::Adaptive { .. } = self.config.schedule {
                self.grad_sq_accum[est.index] += value * value;
            }
            let eta = self.config.schedule.eta(
                self.t,
                n,
                self.config.horizon,
                self.grad_sq_accum[est.index],
            )?;
            let mut exponent = eta * value;
            if exponent > MAX_UPDATE_EXPONENT {
                exponent = MAX_UPDATE_EXPONENT;
                clipped += 1;
            }
            if exponent != 0.0 {
                self.weights.add(est.index, exponent);
            }
        }
        self.clip_events += clipped as u64;
        self.t += 1;
        self.played = None;
        Ok(clipped)
    }
}

/// Running sampler regret `max_q sum_t q . L_t - sum_t q_t . L_t`.
///
/// The comparator over the uncertainty set is attained at a vertex, so it
/// equals the top-`k` sum of the cumulative loss vector divided by `k`.
#[derive(Debug, Clone)]
pub struct RegretTracker {
    cumulative: Vec<f64>,
    played: f64,
    k: usize,
    rounds: usize,
}

impl RegretTracker {
    pub fn new(level: &RiskLevel) -> Self {
        Self {
            cumulative: vec![0.0; level.n()],
            played: 0.0,
            k: level.k(),
            rounds: 0,
        }
    }

    pub fn observe(&mut self, losses: &[f64], q: &[f64]) -> Result<()> {
        let n = self.cumulative.len();
        if losses.len() != n || q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if losses.len() != n { losses.len() } else { q.len() },
            });
        }
        for ((c, l), p) in self.cumulative.iter_mut().zip(losses).zip(q) {
            *c += l;
            self.played += p * l;
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn comparator(&self) -> f64 {
        top_k_sum(&self.cumulative, self.k) / self.k as f64
    }

    pub fn regret(&self) -> f64 {
        self.comparator() - self.played
    }
}

/// Sampler regret of a full history of loss vectors and played distributions.
pub fn sampler_regret(
    loss_history: &[LossVector],
    q_history: &[DroWeights],
    level: &RiskLevel,
) -> Result<f64> {
    if loss_history.len() != q_history.len() {
        return Err(Error::DimensionMismatch {
            expected: loss_history.len(),
            found: q_history.len(),
        });
    }
    let mut tracker = RegretTracker::new(level);
    for (l, q) in loss_history.iter().zip(q_history) {
        tracker.observe(l.values(), q.values())?;
    }
    Ok(tracker.regret())
}
