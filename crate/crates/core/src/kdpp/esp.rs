//! Elementary symmetric polynomials in the log domain.

use super::{log_add_exp, LogWeightVector};
use crate::error::{invalid, Result};

/// `ln e^j` for `j = 0..=k`, where `e^j = sum_{|I| = j} prod_{i in I} w_i`.
///
/// Each degree carries its own scale (it is stored as a logarithm), so the
/// recurrence `e^j <- e^j + w_i e^{j-1}` neither overflows nor underflows.
/// Degrees with no contributing subset are `-inf`.
pub fn elementary_symmetric(weights: &LogWeightVector, k: usize) -> Result<Vec<f64>> {
    if k > weights.len() {
        return Err(invalid(format!("k = {k} exceeds N = {}", weights.len())));
    }
    let mut e = vec![f64::NEG_INFINITY; k + 1];
    e[0] = 0.0;
    accumulate(&mut e, weights.log_weights().iter().copied());
    Ok(e)
}

/// Folds the items of `log_w` into the log-ESP vector `e` (degrees `0..e.len()`).
pub(crate) fn accumulate(e: &mut [f64], log_w: impl Iterator<Item = f64>) {
    let top = e.len() - 1;
    // highest degree currently nonzero
    let mut reach = e.iter().rposition(|v| *v > f64::NEG_INFINITY).unwrap_or(0);
    for lw in log_w {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        reach = (reach + 1).min(top);
        for j in (1..=reach).rev() {
            e[j] = log_add_exp(e[j], lw + e[j - 1]);
        }
    }
}

/// `ln e^{k-1}_{-i}` for every `i` in `targets`, via divide and conquer.
///
/// A segment receives the ESP of everything outside it; splitting hands each
/// half the outside ESP extended by the other half. Only additions are
/// performed, so there is no cancellation. Cost is `O(N k log N)`.
pub(crate) fn leave_one_out(log_w: &[f64], k: usize, targets: &[bool], out: &mut [f64]) {
    let mut outside = vec![f64::NEG_INFINITY; k];
    outside[0] = 0.0;
    recurse(log_w, 0, log_w.len(), &outside, targets, out);
}

fn recurse(log_w: &[f64], lo: usize, hi: usize, outside: &[f64], targets: &[bool], out: &mut [f64]) {
    if !targets[lo..hi].iter().any(|&t| t) {
        return;
    }
    if hi - lo == 1 {
        out[lo] = outside[outside.len() - 1];
        return;
    }
    let mid = lo + (hi - lo) / 2;
    let mut left = outside.to_vec();
    accumulate(&mut left, log_w[mid..hi].iter().copied());
    recurse(log_w, lo, mid, &left, targets, out);
    let mut right = outside.to_vec();
    accumulate(&mut right, log_w[lo..mid].iter().copied());
    recurse(log_w, mid, hi, &right, targets, out);
}
