//! Sampler-only simulations: regret growth under synthetic loss sequences and
//! the exact-versus-approximate marginal gap.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kdpp::{approx_marginals, exact_marginals, tv_distance, LogWeightVector};
use crate::risk::RiskLevel;
use crate::rng::{substream, Stream};
use crate::sampler::{EtaSchedule, LossEstimate, RegretTracker, SamplerConfig, SamplerState};

/// Largest population for which the marginal benchmark computes exact marginals.
pub const MARGINALS_BENCH_MAX_N: usize = 2000;

/// Full loss vector revealed each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossModel {
    /// Every item has loss `value`.
    Constant { value: f64 },
    /// A fixed set of `k` items (chosen once per seed) draws Bernoulli(`p_high`)
    /// losses, the rest Bernoulli(`p_low`).
    TopkBernoulli { p_high: f64, p_low: f64 },
    /// As above, but the designated set is redrawn every `period` rounds.
    Switching { p_high: f64, p_low: f64, period: usize },
}

impl LossModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LossModel::Constant { value } => (0.0..=1.0).contains(&value),
            LossModel::TopkBernoulli { p_high, p_low } => (0.0..=1.0).contains(&p_high) && (0.0..=1.0).contains(&p_low),
            LossModel::Switching { p_high, p_low, period } => {
                (0.0..=1.0).contains(&p_high) && (0.0..=1.0).contains(&p_low) && period > 0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid loss model {self:?}")))
        }
    }
}

fn designate<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for i in rand::seq::index::sample(rng, n, k) {
        mask[i] = true;
    }
    mask
}

/// Sampler regret after `horizon` rounds of one simulated run.
///
/// Regret is measured against the played distributions, `max_q sum_t q . L_t
/// - sum_t q_t . L_t`, with the sampler seeing only the drawn loss.
pub fn simulate_regret(
    n: usize,
    k: usize,
    horizon: usize,
    sampler: SamplerConfig,
    model: &LossModel,
    seed: u64,
) -> Result<f64> {
    model.validate()?;
    let level = RiskLevel::from_k(k, n)?;
    let mut cfg = sampler;
    cfg.horizon = Some(horizon.max(1));
    let mut s = SamplerState::new(n, &level, cfg)?;
    let mut tracker = RegretTracker::new(&level);
    let mut draws = substream(seed, Stream::Draws);
    let mut loss_rng = substream(seed, Stream::Losses);
    let mut mask = designate(&mut loss_rng, n, k);
    let mut losses = vec![0.0; n];
    for t in 0..horizon {
        match *model {
            LossModel::Constant { value } => losses.fill(value),
            LossModel::TopkBernoulli { p_high, p_low } | LossModel::Switching { p_high, p_low, .. } => {
                if let LossModel::Switching { period, .. } = *model {
                    if t > 0 && t % period == 0 {
                        mask = designate(&mut loss_rng, n, k);
                    }
                }
                for (l, &m) in losses.iter_mut().zip(&mask) {
                    let p = if m { p_high } else { p_low };
                    *l = if loss_rng.random::<f64>() < p { 1.0 } else { 0.0 };
                }
            }
        }
        let q = s.distribution()?.values().to_vec();
        tracker.observe(&losses, &q)?;
        let i = s.draw(draws.random())?;
        s.update(&LossEstimate::new(i, losses[i], q[i])?)?;
    }
    Ok(tracker.regret())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub horizon: usize,
    pub median: f64,
    pub mean: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTable {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<RegretRow>,
    /// Least-squares slope of ln(median regret) on ln T; `None` with fewer
    /// than two positive rows.
    pub slope: Option<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Ordinary least-squares slope of `ln y` on `ln x` over positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One independent run per (horizon, seed); a fixed-horizon schedule is
/// tuned to each horizon separately.
pub fn regret_bench(
    n: usize,
    k: usize,
    horizons: &[usize],
    sampler: SamplerConfig,
    model: &LossModel,
    seeds: &[u64],
) -> Result<RegretTable> {
    RiskLevel::from_k(k, n)?;
    if seeds.is_empty() {
        return Err(invalid("at least one seed is required"));
    }
    let mut rows = Vec::new();
    for &t in horizons.iter().filter(|&&t| t > 0) {
        let per_seed = seeds
            .iter()
            .map(|&s| simulate_regret(n, k, t, sampler, model, s))
            .collect::<Result<Vec<_>>>()?;
        rows.push(RegretRow {
            horizon: t,
            median: median(&per_seed),
            mean: per_seed.iter().sum::<f64>() / per_seed.len() as f64,
            per_seed,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.horizon as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median).collect();
    Ok(RegretTable {
        n,
        k,
        slope: loglog_slope(&xs, &ys),
        rows,
    })
}

/// Default sampler for regret simulations: fixed-horizon rate, gamma 0.01.
pub fn default_regret_sampler() -> SamplerConfig {
    SamplerConfig {
        schedule: EtaSchedule::FixedHorizon,
        gamma: 0.01,
        horizon: None,
    }
}

/// Random log-weights for the marginal benchmark: `sigma * Z`.
pub fn random_log_weights<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> LogWeightVector {
    let lw = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect();
    LogWeightVector::from_log(lw).expect("finite log-weights")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalsRow {
    pub n: usize,
    pub k: usize,
    pub median_tv: f64,
    pub max_tv: f64,
    pub per_seed: Vec<f64>,
}

/// Subset size of the marginal benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSize {
    /// `k = floor(alpha N)` for every `N`.
    Alpha(f64),
    /// The same `k` for every `N`.
    Count(usize),
}

/// `TV(exact, approx)` with log-normal weights of spread `sigma`, one draw
/// per seed.
pub fn marginals_bench(ns: &[usize], tail: TailSize, sigma: f64, seeds: &[u64]) -> Result<Vec<MarginalsRow>> {
    if seeds.is_empty() {
        return Err(invalid("at least one seed is required"));
    }
    let mut rows = Vec::new();
    for &n in ns {
        if n > MARGINALS_BENCH_MAX_N {
            return Err(invalid(format!("exact marginals limited to N <= {MARGINALS_BENCH_MAX_N}")));
        }
        let k = match tail {
            TailSize::Alpha(alpha) => RiskLevel::new(alpha, n)?.k(),
            TailSize::Count(k) => RiskLevel::from_k(k, n)?.k(),
        };
        if k >= n {
            return Err(invalid(format!("need k < N, got k = {k}, N = {n}")));
        }
        let per_seed = seeds
            .iter()
            .map(|&s| {
                let mut rng = substream(s ^ (n as u64) << 32, Stream::Weights);
                let w = random_log_weights(&mut rng, n, sigma);
                tv_distance(&exact_marginals(&w, k)?, &approx_marginals(&w, k)?)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(MarginalsRow {
            n,
            k,
            median_tv: median(&per_seed),
            max_tv: per_seed.iter().copied().fold(0.0, f64::max),
            per_seed,
        });
    }
    Ok(rows)
}
