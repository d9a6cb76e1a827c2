//! Empirical risk measures: VaR, CVaR, the Rockafellar dual objective and the
//! inner maximization of the distributionally robust formulation.
//!
//! The empirical CVaR at level `alpha` over `N` losses is the average of the
//! `k = floor(alpha * N)` largest losses. This is the value of
//! `max_{q in Q} q . L` over the set
//! `Q = { q : 0 <= q_i <= 1/k, sum q_i = 1 }`, whose maximizers include the
//! vertex placing `1/k` on the `k` largest losses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance used when validating that a weight vector sums to one.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Per-example losses normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("loss vector is empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(invalid(format!("loss {v} at index {i} is outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for LossVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LossVector> for Vec<f64> {
    fn from(v: LossVector) -> Self {
        v.0
    }
}

/// Risk level `alpha` bound to a population size `n`, with `k = floor(alpha * n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskLevel {
    alpha: f64,
    n: usize,
    k: usize,
}

impl RiskLevel {
    /// Fails unless `0 < alpha <= 1` and `floor(alpha * n) >= 1`.
    ///
    /// The floor is taken with a `1e-9` slack so that `alpha = k / n`
    /// computed in floating point maps back to `k`.
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("alpha = {alpha} is outside (0, 1]")));
        }
        if n == 0 {
            return Err(invalid("population size is zero"));
        }
        let k = ((alpha * n as f64) + 1e-9).floor() as usize;
        if k == 0 {
            return Err(invalid(format!(
                "floor(alpha * N) = 0 for alpha = {alpha}, N = {n}"
            )));
        }
        Ok(Self { alpha, n, k: k.min(n) })
    }

    /// Level with `alpha = k / n`.
    pub fn from_k(k: usize, n: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(invalid(format!("k = {k} outside 1..={n}")));
        }
        Ok(Self {
            alpha: k as f64 / n as f64,
            n,
            k,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check(&self, losses: &LossVector) -> Result<()> {
        if losses.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: losses.len(),
            });
        }
        Ok(())
    }
}

/// A point of the DRO set: nonnegative, capped at `1/k`, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroWeights {
    q: Vec<f64>,
    k: usize,
}

impl DroWeights {
    pub fn new(q: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || k > q.len() {
            return Err(invalid(format!("k = {k} invalid for N = {}", q.len())));
        }
        let cap = 1.0 / k as f64 + 1e-12;
        if let Some((i, v)) = q.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= cap)) {
            return Err(invalid(format!("q[{i}] = {v} outside [0, 1/k]")));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { q, k })
    }

    /// Uniform weights `1/n`.
    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            q: vec![1.0 / n as f64; n],
            k,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `q . losses`.
    pub fn dot(&self, losses: &[f64]) -> f64 {
        self.q.iter().zip(losses).map(|(q, l)| q * l).sum()
    }
}

/// Indices of the `k` largest values, ties broken toward lower indices.
pub(crate) fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps lower indices first among equal values
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order.truncate(k);
    order
}

/// Sum of the `k` largest values in O(N).
pub(crate) fn top_k_sum(values: &[f64], k: usize) -> f64 {
    if k >= values.len() {
        return values.iter().sum();
    }
    let mut scratch = values.to_vec();
    scratch.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    scratch[..k].iter().sum()
}

/// The `k`-th largest loss.
pub fn empirical_var(losses: &LossVector, level: &RiskLevel) -> Result<f64> {
    level.check(losses)?;
    let mut sorted = losses.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[level.k() - 1])
}

/// Mean of the `k` largest losses.
pub fn empirical_cvar(losses: &LossVector, level: &RiskLevel) -> Result<f64> {
    level.check(losses)?;
    Ok(top_k_sum(losses.values(), level.k()) / level.k() as f64)
}

/// `ell + 1/(alpha N) * sum_i max(0, L_i - ell)`.
pub fn rockafellar_objective(losses: &LossVector, ell: f64, level: &RiskLevel) -> f64 {
    let hinge: f64 = losses.values().iter().map(|l| (l - ell).max(0.0)).sum();
    ell + hinge / (level.alpha() * losses.len() as f64)
}

/// Solves `max_{q in Q} q . L`, returning the optimal value and the vertex
/// that puts `1/k` on the `k` largest losses.
pub fn dro_inner_max(losses: &LossVector, level: &RiskLevel) -> Result<(f64, DroWeights)> {
    level.check(losses)?;
    let k = level.k();
    let n = losses.len();
    let mut q = vec![0.0; n];
    let mut value = 0.0;
    for i in top_k_indices(losses.values(), k) {
        q[i] = 1.0 / k as f64;
        value += losses.values()[i];
    }
    Ok((value / k as f64, DroWeights { q, k }))
}
