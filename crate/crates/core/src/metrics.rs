use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::Result;
use crate::learners::{dataset_losses, predict, LossSpec, ModelParams};
use crate::risk::{empirical_cvar, RiskLevel};

/// Evaluation metrics on normalized losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_loss: f64,
    pub cvar: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_class_precision: Option<f64>,
}

/// Risk level for evaluation; at least one example is in the tail.
pub fn eval_level(alpha: f64, n: usize) -> Result<RiskLevel> {
    RiskLevel::new(alpha.max(1.0 / n as f64), n)
}

/// CVaR of the normalized losses at each level.
pub fn cvar_profile(params: &ModelParams, data: &Dataset, loss: &LossSpec, alphas: &[f64]) -> Result<Vec<f64>> {
    let losses = dataset_losses(params, data, loss)?;
    alphas
        .iter()
        .map(|&a| empirical_cvar(&losses, &eval_level(a, data.len())?))
        .collect()
}

pub fn evaluate(params: &ModelParams, data: &Dataset, loss: &LossSpec, alpha: f64) -> Result<EvalMetrics> {
    let losses = dataset_losses(params, data, loss)?;
    let cvar = empirical_cvar(&losses, &eval_level(alpha, data.len())?)?;
    let (accuracy, min_class_precision) = match data.task() {
        Task::Binary => {
            let (acc, prec) = classification(params, data)?;
            (Some(acc), Some(prec))
        }
        _ => (None, None),
    };
    Ok(EvalMetrics {
        mean_loss: losses.mean(),
        cvar,
        alpha,
        accuracy,
        min_class_precision,
    })
}

/// Accuracy and the smallest per-class precision of the sign classifier.
/// A class that is never predicted has precision zero.
fn classification(params: &ModelParams, data: &Dataset) -> Result<(f64, f64)> {
    let mut correct = 0usize;
    let mut predicted = [0usize; 2];
    let mut true_pos = [0usize; 2];
    for i in 0..data.len() {
        let c = usize::from(predict(params, data.row(i))? >= 0.0);
        predicted[c] += 1;
        if Some(c) == data.class_of(i) {
            correct += 1;
            true_pos[c] += 1;
        }
    }
    let precision = (0..2)
        .map(|c| {
            if predicted[c] == 0 {
                0.0
            } else {
                true_pos[c] as f64 / predicted[c] as f64
            }
        })
        .fold(f64::INFINITY, f64::min);
    Ok((correct as f64 / data.len() as f64, precision))
}
