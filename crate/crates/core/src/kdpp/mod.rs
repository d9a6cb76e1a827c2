//! Diagonal k-DPP machinery.
//!
//! A k-DPP with kernel `diag(w)` picks a size-`k` subset `I` with probability
//! proportional to `prod_{i in I} w_i`. Its singleton marginals, divided by
//! `k`, form a point of the CVaR uncertainty set, which is what the sampler
//! plays. Weights are kept in the log domain throughout.

mod esp;
mod marginals;
mod nu;
mod sumtree;

pub use esp::elementary_symmetric;
pub use marginals::{approx_marginals, exact_marginals};
pub use nu::{solve_nu, NuSolution, NU_MAX_ITERATIONS, NU_TOLERANCE};
pub use sumtree::SumTree;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Log-weights are shifted down by their maximum once it exceeds this value.
pub const RESCALE_THRESHOLD: f64 = 250.0;

/// Tolerance on `sum_i p_i = k`.
pub const MARGINAL_SUM_TOL: f64 = 1e-8;

/// Kernel diagonal stored as natural logarithms; `-inf` encodes a zero weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogWeightVector {
    log_w: Vec<f64>,
}

impl LogWeightVector {
    /// All weights equal to one.
    pub fn ones(n: usize) -> Self {
        Self {
            log_w: vec![0.0; n],
        }
    }

    pub fn from_log(log_w: Vec<f64>) -> Result<Self> {
        if log_w.is_empty() {
            return Err(invalid("weight vector is empty"));
        }
        if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(invalid("log-weights must be finite or -inf"));
        }
        Ok(Self { log_w })
    }

    /// From nonnegative linear weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if let Some(v) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!("weight {v} is not a finite nonnegative number")));
        }
        Self::from_log(w.iter().map(|v| v.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    /// Number of strictly positive weights.
    pub fn num_positive(&self) -> usize {
        self.log_w.iter().filter(|v| v.is_finite()).count()
    }

    /// Linear weights (may underflow for very negative entries).
    pub fn weights(&self) -> Vec<f64> {
        self.log_w.iter().map(|v| v.exp()).collect()
    }

    /// Multiplies `w_i` by `exp(delta)`, then rescales if needed.
    pub fn add(&mut self, i: usize, delta: f64) {
        self.log_w[i] += delta;
        self.rescale_if_needed();
    }

    /// Shifts every log-weight by `-max` when `max > RESCALE_THRESHOLD`.
    /// Marginals are invariant under a common scale of `w`.
    pub fn rescale_if_needed(&mut self) -> bool {
        let max = self.max_log();
        if max > RESCALE_THRESHOLD {
            for v in &mut self.log_w {
                *v -= max;
            }
            true
        } else {
            false
        }
    }

    pub(crate) fn max_log(&self) -> f64 {
        self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(invalid(format!("k = {k} invalid for N = {}", self.len())));
        }
        let positive = self.num_positive();
        if positive < k {
            return Err(Error::InfeasibleConstraint { k, positive });
        }
        Ok(())
    }
}

/// Singleton inclusion probabilities of a size-`k` point process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistribution {
    p: Vec<f64>,
    k: usize,
}

impl MarginalDistribution {
    pub fn new(p: Vec<f64>, k: usize) -> Result<Self> {
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("marginal p[{i}] = {v} outside [0, 1]")));
        }
        let total: f64 = p.iter().sum();
        if (total - k as f64).abs() > MARGINAL_SUM_TOL {
            return Err(invalid(format!("marginals sum to {total}, expected {k}")));
        }
        Ok(Self { p, k })
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Total variation distance between the singleton distributions `p/k` and `q/k`.
pub fn tv_distance(p: &MarginalDistribution, q: &MarginalDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if p.k != q.k {
        return Err(invalid(format!("k mismatch: {} vs {}", p.k, q.k)));
    }
    let k = p.k as f64;
    Ok(0.5 * p.p.iter().zip(&q.p).map(|(a, b)| (a - b).abs()).sum::<f64>() / k)
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
