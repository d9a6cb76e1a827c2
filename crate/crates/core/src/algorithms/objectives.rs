use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::learners::{predict, LossSpec, ModelParams};

/// Mini-batch objective whose gradient drives the parameter player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchObjective {
    /// Plain average of the batch losses.
    Mean,
    /// `ell + 1/(alpha b) sum_i max(0, L_i - ell)`.
    Trunc { ell: f64, alpha: f64 },
    /// `ell + 1/(alpha b) sum_i tau ln(1 + exp((L_i - ell) / tau))`, the
    /// log-sum-exp relaxation of each hinge.
    Soft { ell: f64, alpha: f64, tau: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    pub objective: f64,
    pub losses: Vec<f64>,
    pub grad: Vec<f64>,
    pub grad_bias: f64,
    /// Derivative in the threshold (zero for the mean objective).
    pub grad_ell: f64,
}

impl BatchGradient {
    /// True when the parameter gradient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.grad_bias == 0.0 && self.grad.iter().all(|g| *g == 0.0)
    }
}

/// `tau ln(1 + e^{x/tau})`, stable for either sign.
fn softplus(x: f64, tau: f64) -> f64 {
    let s = x / tau;
    tau * (s.max(0.0) + (-s.abs()).exp().ln_1p())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl BatchObjective {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BatchObjective::Mean => Ok(()),
            BatchObjective::Trunc { ell, alpha } | BatchObjective::Soft { ell, alpha, .. } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(invalid(format!("alpha {alpha} outside (0, 1]")));
                }
                if !ell.is_finite() {
                    return Err(invalid("threshold must be finite"));
                }
                if let BatchObjective::Soft { tau, .. } = *self {
                    if !(tau > 0.0 && tau.is_finite()) {
                        return Err(Error::Config(format!("soft temperature {tau} must be positive")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Objective value on a batch of normalized losses.
    pub fn value(&self, losses: &[f64]) -> f64 {
        let b = losses.len() as f64;
        match *self {
            BatchObjective::Mean => losses.iter().sum::<f64>() / b,
            BatchObjective::Trunc { ell, alpha } => {
                ell + losses.iter().map(|l| (l - ell).max(0.0)).sum::<f64>() / (alpha * b)
            }
            BatchObjective::Soft { ell, alpha, tau } => {
                ell + losses.iter().map(|l| softplus(l - ell, tau)).sum::<f64>() / (alpha * b)
            }
        }
    }

    /// Per-example weights on the loss gradients and the threshold derivative.
    pub fn weights(&self, losses: &[f64]) -> (Vec<f64>, f64) {
        let b = losses.len() as f64;
        match *self {
            BatchObjective::Mean => (vec![1.0 / b; losses.len()], 0.0),
            BatchObjective::Trunc { ell, alpha } => {
                let w: Vec<f64> = losses
                    .iter()
                    .map(|&l| if l > ell { 1.0 / (alpha * b) } else { 0.0 })
                    .collect();
                let s: f64 = w.iter().sum();
                (w, 1.0 - s)
            }
            BatchObjective::Soft { ell, alpha, tau } => {
                let w: Vec<f64> = losses.iter().map(|&l| sigmoid((l - ell) / tau) / (alpha * b)).collect();
                let s: f64 = w.iter().sum();
                (w, 1.0 - s)
            }
        }
    }
}

/// Value and gradients of `objective` on the batch `indices` at `params`.
pub fn batch_gradient(
    objective: &BatchObjective,
    params: &ModelParams,
    data: &Dataset,
    indices: &[usize],
    loss: &LossSpec,
) -> Result<BatchGradient> {
    if indices.is_empty() {
        return Err(invalid("empty batch"));
    }
    let mut losses = Vec::with_capacity(indices.len());
    let mut slopes = Vec::with_capacity(indices.len());
    for &i in indices {
        let pred = predict(params, data.row(i))?;
        let (l, s) = loss.value_and_slope(pred, data.target(i))?;
        losses.push(l);
        slopes.push(s);
    }
    let (w, grad_ell) = objective.weights(&losses);
    let mut grad = vec![0.0; params.dim()];
    let mut grad_bias = 0.0;
    for ((&i, s), wi) in indices.iter().zip(&slopes).zip(&w) {
        let c = wi * s;
        if c == 0.0 {
            continue;
        }
        for (g, x) in grad.iter_mut().zip(data.row(i)) {
            *g += c * x;
        }
        grad_bias += c;
    }
    Ok(BatchGradient {
        objective: objective.value(&losses),
        losses,
        grad,
        grad_bias,
        grad_ell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trunc_examples() {
        let t = BatchObjective::Trunc { ell: 0.5, alpha: 0.5 };
        let (w, gl) = t.weights(&[0.2, 0.8]);
        assert_eq!(gl, 0.0);
        assert_eq!(w, vec![0.0, 1.0]);
        let t = BatchObjective::Trunc { ell: 0.9, alpha: 0.1 };
        let (w, gl) = t.weights(&[0.2, 0.8, 0.3]);
        assert_eq!(gl, 1.0);
        assert!(w.iter().all(|v| *v == 0.0));
        // alpha = 1: the weights are the mean weights on the active set
        let t = BatchObjective::Trunc { ell: 0.25, alpha: 1.0 };
        let (w, gl) = t.weights(&[0.2, 0.8, 0.3, 0.1]);
        assert_eq!(w, vec![0.0, 0.25, 0.25, 0.0]);
        assert_eq!(gl, 0.5);
    }

    #[test]
    fn soft_limits() {
        let losses = [0.1, 0.7, 0.4, 0.95, 0.3];
        let trunc = BatchObjective::Trunc { ell: 0.35, alpha: 0.2 }.value(&losses);
        let soft = BatchObjective::Soft {
            ell: 0.35,
            alpha: 0.2,
            tau: 1e-4,
        }
        .value(&losses);
        assert!(soft >= trunc && soft - trunc < 1e-3);
        assert!(BatchObjective::Soft { ell: 0.0, alpha: 0.1, tau: 0.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn soft_upper_bounds_trunc(
            losses in prop::collection::vec(0.0..=1.0f64, 2..64),
            ell in 0.0..=1.0f64,
            alpha in 0.01..=1.0f64,
            tau in 1e-4..1.0f64,
        ) {
            let t = BatchObjective::Trunc { ell, alpha }.value(&losses);
            let s = BatchObjective::Soft { ell, alpha, tau }.value(&losses);
            let b = losses.len() as f64;
            prop_assert!(s >= t - 1e-12);
            prop_assert!(s - t <= tau * b.ln() / alpha + 1e-12);
        }
    }
}
