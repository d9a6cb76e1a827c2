use super::objectives::{batch_gradient, BatchObjective};
use super::RunTrace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{dataset_losses, LossSpec, ModelParams};
use crate::risk::{empirical_cvar, top_k_sum, LossVector, RiskLevel};

/// Approximate CVaR minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub params: ModelParams,
    pub ell: f64,
    /// Empirical CVaR of the losses at `params`.
    pub cvar: f64,
}

/// Full-batch subgradient descent on the truncated objective with step
/// `lr0 / sqrt(t)`, keeping the iterate of lowest empirical CVaR.
pub fn cvar_oracle(data: &Dataset, loss: &LossSpec, level: &RiskLevel, steps: usize, lr0: f64) -> Result<OracleSolution> {
    let all: Vec<usize> = (0..data.len()).collect();
    let mut params = ModelParams::zeros(data.dim());
    let mut ell = 0.5;
    let eval = |p: &ModelParams| -> Result<f64> { empirical_cvar(&dataset_losses(p, data, loss)?, level) };
    let mut best = OracleSolution {
        cvar: eval(&params)?,
        params: params.clone(),
        ell,
    };
    for t in 1..=steps {
        let obj = BatchObjective::Trunc {
            ell,
            alpha: level.alpha(),
        };
        let g = batch_gradient(&obj, &params, data, &all, loss)?;
        let lr = lr0 / (t as f64).sqrt();
        for (p, gi) in params.theta.iter_mut().zip(&g.grad) {
            *p -= lr * gi;
        }
        params.bias -= lr * g.grad_bias;
        ell = (ell - lr * g.grad_ell).clamp(0.0, 1.0);
        if !params.is_finite() {
            return Err(Error::Numeric { step: t });
        }
        let c = eval(&params)?;
        if c < best.cvar {
            best = OracleSolution {
                params: params.clone(),
                ell,
                cvar: c,
            };
        }
    }
    Ok(best)
}

/// `sum_t CVaR(L(theta_t)) - sum_t q_t . L(theta*)` over an instrumented trace.
pub fn game_regret(trace: &RunTrace, level: &RiskLevel, theta_star_losses: &LossVector) -> Result<f64> {
    if trace.full_losses.is_empty() || trace.full_losses.len() != trace.q_history.len() {
        return Err(Error::MissingInstrumentation("per-step full loss vectors"));
    }
    let n = level.n();
    if theta_star_losses.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: theta_star_losses.len(),
        });
    }
    let k = level.k() as f64;
    let star = theta_star_losses.values();
    let mut total = 0.0;
    for (l, q) in trace.full_losses.iter().zip(&trace.q_history) {
        if l.len() != n || q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: l.len().min(q.len()),
            });
        }
        let played: f64 = q.iter().zip(star).map(|(a, b)| a * b).sum();
        total += top_k_sum(l, level.k()) / k - played;
    }
    Ok(total)
}
