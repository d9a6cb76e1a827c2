//! The parameter player: linear models with losses normalized to [0, 1] and
//! first-order optimizers.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::kdpp::log_add_exp;
use crate::risk::LossVector;

/// Percentile of initial-model training losses used as the loss scale.
pub const SCALE_PERCENTILE: f64 = 99.5;

/// Smallest logistic scale: `ln(1 + e^5)`, the raw loss at margin -5.
pub fn logistic_scale_floor() -> f64 {
    log_add_exp(0.0, 5.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(d: usize) -> Self {
        Self {
            theta: vec![0.0; d],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.theta.iter().all(|v| v.is_finite())
    }

    /// Scales `theta` back onto the ball of the given radius.
    pub fn project(&mut self, radius: f64) {
        let norm = self.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            let s = radius / norm;
            self.theta.iter_mut().for_each(|v| *v *= s);
        }
    }
}

pub fn predict(params: &ModelParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: x.len(),
        });
    }
    Ok(dot(&params.theta, x) + params.bias)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    SquaredNormalized,
    LogisticNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub scale: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("loss scale {scale} must be positive")));
        }
        Ok(Self { kind, scale })
    }

    /// Unnormalized loss and its derivative with respect to the prediction.
    fn raw(&self, pred: f64, y: f64) -> Result<(f64, f64)> {
        match self.kind {
            LossKind::SquaredNormalized => {
                let r = pred - y;
                Ok((r * r, 2.0 * r))
            }
            LossKind::LogisticNormalized => {
                if y != 1.0 && y != -1.0 {
                    return Err(invalid(format!("logistic loss needs labels in {{-1, +1}}, got {y}")));
                }
                let m = -y * pred;
                // d/dpred ln(1 + e^m) = -y sigmoid(m)
                let sig = if m >= 0.0 { 1.0 / (1.0 + (-m).exp()) } else { m.exp() / (1.0 + m.exp()) };
                Ok((log_add_exp(0.0, m), -y * sig))
            }
        }
    }

    /// Normalized loss of a prediction.
    pub fn value(&self, pred: f64, y: f64) -> Result<f64> {
        Ok((self.raw(pred, y)?.0 / self.scale).min(1.0))
    }

    /// Normalized loss and its derivative in the prediction (zero once clamped).
    pub fn value_and_slope(&self, pred: f64, y: f64) -> Result<(f64, f64)> {
        let (raw, d) = self.raw(pred, y)?;
        if raw >= self.scale {
            Ok((1.0, 0.0))
        } else {
            Ok((raw / self.scale, d / self.scale))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub grad_bias: f64,
}

pub fn loss_and_grad(params: &ModelParams, x: &[f64], y: f64, spec: &LossSpec) -> Result<LossGrad> {
    let pred = predict(params, x)?;
    let (loss, slope) = spec.value_and_slope(pred, y)?;
    Ok(LossGrad {
        loss,
        grad: x.iter().map(|v| slope * v).collect(),
        grad_bias: slope,
    })
}

/// Central differences of the normalized loss; the bias derivative is the
/// last entry.
pub fn finite_diff_grad(params: &ModelParams, x: &[f64], y: f64, spec: &LossSpec, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(invalid("step h must be positive"));
    }
    let f = |p: &ModelParams| -> Result<f64> { spec.value(predict(p, x)?, y) };
    let mut out = Vec::with_capacity(params.dim() + 1);
    for j in 0..=params.dim() {
        let up = f(&shifted(params, j, h))?;
        let down = f(&shifted(params, j, -h))?;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn shifted(p: &ModelParams, j: usize, delta: f64) -> ModelParams {
    let mut q = p.clone();
    if j < q.dim() {
        q.theta[j] += delta;
    } else {
        q.bias += delta;
    }
    q
}

/// Normalized losses of every example.
pub fn dataset_losses(params: &ModelParams, data: &Dataset, spec: &LossSpec) -> Result<LossVector> {
    let values = (0..data.len())
        .map(|i| spec.value(predict(params, data.row(i))?, data.target(i)))
        .collect::<Result<Vec<_>>>()?;
    LossVector::new(values)
}

/// Raw losses of every example, without normalization.
pub fn raw_losses(params: &ModelParams, data: &Dataset, kind: LossKind) -> Result<Vec<f64>> {
    let unit = LossSpec { kind, scale: 1.0 };
    (0..data.len())
        .map(|i| Ok(unit.raw(predict(params, data.row(i))?, data.target(i))?.0))
        .collect()
}

/// Linear-interpolation percentile (`q` in [0, 100]).
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("percentile of an empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Loss scale: the 99.5th percentile of raw training losses at `params`,
/// floored so the scale never collapses.
pub fn fit_scale(params: &ModelParams, train: &Dataset, kind: LossKind) -> Result<LossSpec> {
    let p = percentile(&raw_losses(params, train, kind)?, SCALE_PERCENTILE)?;
    let scale = match kind {
        LossKind::SquaredNormalized if p > 0.0 => p,
        LossKind::SquaredNormalized => 1.0,
        LossKind::LogisticNormalized => p.max(logistic_scale_floor()),
    };
    LossSpec::new(kind, scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    PlainSgd,
    MomentumSgd { momentum: f64 },
    AdaptiveMoment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Radius of the L2 ball `theta` is projected onto after each step.
    pub projection_radius: Option<f64>,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::PlainSgd,
            lr,
            projection_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("learning rate {} must be nonnegative", self.lr)));
        }
        if let OptimizerKind::MomentumSgd { momentum } = self.kind {
            if !(0.0..1.0).contains(&momentum) {
                return Err(Error::Config(format!("momentum {momentum} outside [0, 1)")));
            }
        }
        if let Some(r) = self.projection_radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!("projection radius {r} must be positive")));
            }
        }
        Ok(())
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimizer accumulators over `theta` followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let second = match config.kind {
            OptimizerKind::AdaptiveMoment => vec![0.0; dim + 1],
            _ => Vec::new(),
        };
        Ok(Self {
            config,
            first: vec![0.0; dim + 1],
            second,
            step: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &[f64], grad_bias: f64) -> Result<()> {
        let d = params.dim();
        if grad.len() != d || self.first.len() != d + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.first.len() - 1,
                found: grad.len(),
            });
        }
        self.step += 1;
        let lr = self.config.lr;
        let g = |j: usize| if j < d { grad[j] } else { grad_bias };
        for j in 0..=d {
            let delta = match self.config.kind {
                OptimizerKind::PlainSgd => g(j),
                OptimizerKind::MomentumSgd { momentum } => {
                    self.first[j] = momentum * self.first[j] + g(j);
                    self.first[j]
                }
                OptimizerKind::AdaptiveMoment => {
                    let gj = g(j);
                    self.first[j] = ADAM_BETA1 * self.first[j] + (1.0 - ADAM_BETA1) * gj;
                    self.second[j] = ADAM_BETA2 * self.second[j] + (1.0 - ADAM_BETA2) * gj * gj;
                    let t = self.step as i32;
                    let m = self.first[j] / (1.0 - ADAM_BETA1.powi(t));
                    let v = self.second[j] / (1.0 - ADAM_BETA2.powi(t));
                    m / (v.sqrt() + ADAM_EPS)
                }
            };
            if j < d {
                params.theta[j] -= lr * delta;
            } else {
                params.bias -= lr * delta;
            }
        }
        if let Some(r) = self.config.projection_radius {
            params.project(r);
        }
        Ok(())
    }
}

/// Plain gradient step on a scalar with the same rule family, used for the
/// threshold variable of the dual objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarOptimizer {
    kind: OptimizerKind,
    lr: f64,
    first: f64,
    second: f64,
    step: u64,
}

impl ScalarOptimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            first: 0.0,
            second: 0.0,
            step: 0,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, x: &mut f64, g: f64) {
        self.step += 1;
        let delta = match self.kind {
            OptimizerKind::PlainSgd => g,
            OptimizerKind::MomentumSgd { momentum } => {
                self.first = momentum * self.first + g;
                self.first
            }
            OptimizerKind::AdaptiveMoment => {
                self.first = ADAM_BETA1 * self.first + (1.0 - ADAM_BETA1) * g;
                self.second = ADAM_BETA2 * self.second + (1.0 - ADAM_BETA2) * g * g;
                let t = self.step as i32;
                let m = self.first / (1.0 - ADAM_BETA1.powi(t));
                let v = self.second / (1.0 - ADAM_BETA2.powi(t));
                m / (v.sqrt() + ADAM_EPS)
            }
        };
        *x -= self.lr * delta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use rand::{Rng, SeedableRng};

    fn params(theta: &[f64], bias: f64) -> ModelParams {
        ModelParams {
            theta: theta.to_vec(),
            bias,
        }
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&ModelParams::zeros(3), &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(predict(&params(&[1.0, 2.0], 1.0), &[3.0, 4.0]).unwrap(), 12.0);
        assert_eq!(predict(&params(&[1.0, 2.0], 0.7), &[0.0, 0.0]).unwrap(), 0.7);
        assert!(matches!(
            predict(&params(&[1.0], 0.0), &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn loss_examples() {
        let sq = LossSpec::new(LossKind::SquaredNormalized, 4.0).unwrap();
        let p = params(&[1.0], 0.0);
        let lg = loss_and_grad(&p, &[2.0], 2.0, &sq).unwrap();
        assert_eq!((lg.loss, lg.grad_bias), (0.0, 0.0));
        assert_eq!(lg.grad, vec![0.0]);
        let lg = loss_and_grad(&p, &[2.0], -1.0, &sq).unwrap();
        assert_eq!((lg.loss, lg.grad_bias, lg.grad[0]), (1.0, 0.0, 0.0));

        let lo = LossSpec::new(LossKind::LogisticNormalized, 3.0).unwrap();
        let lg = loss_and_grad(&ModelParams::zeros(2), &[1.0, -1.0], 1.0, &lo).unwrap();
        assert!((lg.loss - 2f64.ln() / 3.0).abs() < 1e-15);
        assert!(loss_and_grad(&ModelParams::zeros(2), &[1.0, -1.0], 0.0, &lo).is_err());
        assert!(LossSpec::new(LossKind::LogisticNormalized, 0.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for kind in [LossKind::SquaredNormalized, LossKind::LogisticNormalized] {
            let spec = LossSpec::new(kind, 5.0).unwrap();
            let mut checked = 0;
            while checked < 100 {
                let d = rng.random_range(1..6);
                let p = ModelParams {
                    theta: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    bias: rng.random_range(-1.0..1.0),
                };
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y = if kind == LossKind::SquaredNormalized {
                    rng.random_range(-2.0..2.0)
                } else if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                };
                let lg = loss_and_grad(&p, &x, y, &spec).unwrap();
                if !(0.01..0.99).contains(&lg.loss) {
                    continue;
                }
                let fd = finite_diff_grad(&p, &x, y, &spec, 1e-5).unwrap();
                let analytic: Vec<f64> = lg.grad.iter().copied().chain([lg.grad_bias]).collect();
                for (a, b) in analytic.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-8), "{a} vs {b}");
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn finite_diff_edges() {
        let sq = LossSpec::new(LossKind::SquaredNormalized, 1.0).unwrap();
        let p = params(&[1.0, 1.0], 0.0);
        let g = finite_diff_grad(&p, &[1.0, 1.0], 2.0, &sq, 1e-5).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
        let g = finite_diff_grad(&p, &[1.0, 1.0], 50.0, &sq, 1e-5).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(finite_diff_grad(&p, &[1.0, 1.0], 2.0, &sq, 0.0).is_err());
    }

    #[test]
    fn losses_stay_in_unit_interval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let specs = [
            LossSpec::new(LossKind::SquaredNormalized, 2.0).unwrap(),
            LossSpec::new(LossKind::LogisticNormalized, 2.0).unwrap(),
        ];
        for i in 0..100_000 {
            let pred = rng.random_range(-1e3..1e3) * rng.random::<f64>().powi(6);
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let v = specs[i % 2].value(pred, y).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn optimizer_examples() {
        let mut p = params(&[1.0], 0.0);
        let mut opt = OptimizerState::new(OptimizerConfig::sgd(0.1), 1).unwrap();
        opt.step(&mut p, &[2.0], 0.0).unwrap();
        assert!((p.theta[0] - 0.8).abs() < 1e-15);
        opt.step(&mut p, &[0.0], 0.0).unwrap();
        assert!((p.theta[0] - 0.8).abs() < 1e-15);

        let (lr, m, g) = (0.1, 0.9, 2.0);
        let cfg = OptimizerConfig {
            kind: OptimizerKind::MomentumSgd { momentum: m },
            lr,
            projection_radius: None,
        };
        let mut p = params(&[1.0], 0.0);
        let mut opt = OptimizerState::new(cfg, 1).unwrap();
        opt.step(&mut p, &[g], 0.0).unwrap();
        opt.step(&mut p, &[g], 0.0).unwrap();
        assert!((p.theta[0] - (1.0 - lr * g * (1.0 + (1.0 + m)))).abs() < 1e-14);

        // first adaptive step moves every coordinate by lr in the sign direction
        let cfg = OptimizerConfig {
            kind: OptimizerKind::AdaptiveMoment,
            lr: 0.01,
            projection_radius: Some(10.0),
        };
        let mut p = params(&[1.0, -1.0], 0.0);
        let mut opt = OptimizerState::new(cfg, 2).unwrap();
        opt.step(&mut p, &[3.0, -0.5], 2.0).unwrap();
        assert!((p.theta[0] - 0.99).abs() < 1e-9 && (p.theta[1] + 0.99).abs() < 1e-9);
        assert!((p.bias + 0.01).abs() < 1e-9);

        let mut p = params(&[30.0, 40.0], 0.0);
        p.project(10.0);
        assert!((p.theta[0] - 6.0).abs() < 1e-12 && (p.theta[1] - 8.0).abs() < 1e-12);
        assert!(OptimizerState::new(OptimizerConfig::sgd(-1.0), 1).is_err());
    }

    #[test]
    fn scale_fitting() {
        let d = Dataset::from_rows((0..200).map(|i| vec![i as f64]).collect(), (0..200).map(|i| i as f64).collect(), Task::Regression)
            .unwrap();
        let spec = fit_scale(&ModelParams::zeros(1), &d, LossKind::SquaredNormalized).unwrap();
        let raw: Vec<f64> = (0..200).map(|i| (i * i) as f64).collect();
        assert!((spec.scale - percentile(&raw, 99.5).unwrap()).abs() < 1e-9);
        let b = Dataset::from_rows(vec![vec![1.0]; 10], vec![1.0; 10], Task::Binary).unwrap();
        let spec = fit_scale(&ModelParams::zeros(1), &b, LossKind::LogisticNormalized).unwrap();
        assert_eq!(spec.scale, logistic_scale_floor());
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 50.0).unwrap(), 2.0);
    }

    #[test]
    fn convex_descent_is_monotone() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let theta = [0.5, -1.0, 2.0];
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys = rows.iter().map(|x| dot(x, &theta) + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let d = Dataset::from_rows(rows, ys, Task::Regression).unwrap();
        let mut p = ModelParams::zeros(3);
        let spec = fit_scale(&p, &d, LossKind::SquaredNormalized).unwrap();
        let mut opt = OptimizerState::new(OptimizerConfig::sgd(0.01), 3).unwrap();
        let mut history = Vec::new();
        for _ in 0..30 {
            for _ in 0..d.len() {
                let i = rng.random_range(0..d.len());
                let lg = loss_and_grad(&p, d.row(i), d.target(i), &spec).unwrap();
                opt.step(&mut p, &lg.grad, lg.grad_bias).unwrap();
            }
            history.push(dataset_losses(&p, &d, &spec).unwrap().mean());
        }
        let transitions = &history[2..];
        let bad = transitions.windows(2).filter(|w| w[1] > w[0]).count();
        let big = transitions.windows(2).any(|w| w[1] > w[0] + 1e-4);
        assert!(!big && bad as f64 <= 0.05 * (transitions.len() - 1) as f64, "{history:?}");
    }
}
