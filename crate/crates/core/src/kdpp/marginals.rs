use super::esp::{elementary_symmetric, leave_one_out};
use super::nu::solve_nu;
use super::{LogWeightVector, MarginalDistribution};
use crate::error::Result;

/// Relative error bound above which the deletion recurrence is abandoned for
/// an index (about three decimal digits lost).
const CANCELLATION_LIMIT: f64 = 1e3 * f64::EPSILON;

/// Exact marginals `P(i) = w_i e^{k-1}_{-i} / e^k`.
///
/// `e^{k-1}_{-i}` comes from the deletion recurrence
/// `e^j_{-i} = e^j - w_i e^{j-1}_{-i}`, whose relative error is tracked per
/// index. Indices whose bound exceeds the limit are recomputed by an
/// addition-only leave-one-out pass.
pub fn exact_marginals(weights: &LogWeightVector, k: usize) -> Result<MarginalDistribution> {
    weights.check_k(k)?;
    let n = weights.len();
    if k == n {
        return MarginalDistribution::new(vec![1.0; n], k);
    }
    let lw = weights.log_weights();
    let e = elementary_symmetric(weights, k)?;
    let log_norm = e[k];

    let mut loo = vec![f64::NEG_INFINITY; n];
    let mut needs_fallback = vec![false; n];
    let eps = f64::EPSILON;
    for (i, &w) in lw.iter().enumerate() {
        if w == f64::NEG_INFINITY {
            continue;
        }
        // running log e^j_{-i} and its relative error bound
        let mut prev = 0.0f64;
        let mut err = 0.0f64;
        let mut ok = true;
        for &ej in &e[1..k] {
            let ratio = (w + prev - ej).exp();
            if ratio >= 1.0 {
                ok = false;
                break;
            }
            let amp = 1.0 / (1.0 - ratio);
            err = amp * 2.0 * eps + (amp - 1.0) * (err + eps) + eps;
            if err > CANCELLATION_LIMIT {
                ok = false;
                break;
            }
            prev = ej + (-ratio).ln_1p();
        }
        if ok {
            loo[i] = prev;
        } else {
            needs_fallback[i] = true;
        }
    }
    if needs_fallback.iter().any(|&f| f) {
        let mut fresh = vec![f64::NEG_INFINITY; n];
        leave_one_out(lw, k, &needs_fallback, &mut fresh);
        for i in (0..n).filter(|&i| needs_fallback[i]) {
            loo[i] = fresh[i];
        }
    }

    let p: Vec<f64> = lw
        .iter()
        .zip(&loo)
        .map(|(w, l)| (w + l - log_norm).exp().clamp(0.0, 1.0))
        .collect();
    MarginalDistribution::new(p, k)
}

/// Marginals of the matched DPP, `w_i e^nu / (1 + w_i e^nu)`, rescaled to sum
/// exactly to `k`.
pub fn approx_marginals(weights: &LogWeightVector, k: usize) -> Result<MarginalDistribution> {
    let nu = solve_nu(weights, k)?.nu;
    let mut p: Vec<f64> = weights
        .log_weights()
        .iter()
        .map(|lw| logistic(lw + nu))
        .collect();
    let total: f64 = p.iter().sum();
    let scale = k as f64 / total;
    for v in &mut p {
        *v = (*v * scale).min(1.0);
    }
    MarginalDistribution::new(p, k)
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
