use serde::{Deserialize, Serialize};

use super::marginals::logistic;
use super::{log_sum_exp, LogWeightVector};
use crate::error::{invalid, Error, Result};

pub const NU_TOLERANCE: f64 = 1e-10;
pub const NU_MAX_ITERATIONS: usize = 200;

/// Root of `sum_i sigmoid(ln w_i + nu) = k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuSolution {
    pub nu: f64,
    /// Signed constraint violation `sum_i sigmoid(ln w_i + nu) - k`.
    pub residual: f64,
    pub iterations: usize,
}

fn expected_size(log_w: &[f64], nu: f64) -> f64 {
    log_w
        .iter()
        .filter(|v| v.is_finite())
        .map(|lw| logistic(lw + nu))
        .sum()
}

/// Bisection for the soft size constraint of the matched DPP.
///
/// Requires `1 <= k < #positive weights`; at equality the constraint is only
/// met as `nu -> inf`.
pub fn solve_nu(weights: &LogWeightVector, k: usize) -> Result<NuSolution> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let positive = weights.num_positive();
    if k >= positive {
        return Err(Error::InfeasibleConstraint { k, positive });
    }
    let lw = weights.log_weights();
    let target = k as f64;
    let f = |nu: f64| expected_size(lw, nu) - target;

    let log_k = target.ln();
    let min_lw = lw
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let mut lo = log_k - log_sum_exp(lw) - 40.0;
    let mut hi = log_k - min_lw + 40.0;
    let mut step = 40.0;
    while f(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
    }
    step = 40.0;
    while f(hi) < 0.0 {
        hi += step;
        step *= 2.0;
    }

    let mut best = NuSolution {
        nu: lo,
        residual: f(lo),
        iterations: 0,
    };
    for it in 1..=NU_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let r = f(mid);
        if r.abs() < best.residual.abs() {
            best = NuSolution {
                nu: mid,
                residual: r,
                iterations: it,
            };
        }
        best.iterations = it;
        if r.abs() <= NU_TOLERANCE || mid <= lo || mid >= hi {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}
