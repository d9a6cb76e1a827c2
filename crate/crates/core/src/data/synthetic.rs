use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Task};
use crate::error::{invalid, Error, Result};
use crate::rng::{substream, Stream};

/// Tail index of the Pareto noise.
pub const PARETO_SHAPE: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    Normal,
    Pareto,
    Sinc,
    TwoGaussians,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    #[serde(default = "default_dim")]
    pub d: usize,
    /// Noise scale: Gaussian std, Pareto scale, or within-class std.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Distance between the two class means.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Prior probability of the positive class.
    #[serde(default = "default_positive_fraction")]
    pub positive_fraction: f64,
}

fn default_dim() -> usize {
    10
}
fn default_noise() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    2.0
}
fn default_positive_fraction() -> f64 {
    0.5
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, d: usize) -> Self {
        Self {
            kind,
            n,
            d,
            noise: default_noise(),
            separation: default_separation(),
            positive_fraction: default_positive_fraction(),
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }
}

/// Generated dataset and, for the linear families, the generating parameter.
#[derive(Debug, Clone)]
pub struct Generated {
    pub data: Dataset,
    pub theta_true: Option<Vec<f64>>,
}

/// Zero-mean Pareto noise: `X - E[X]` with `X ~ Pareto(scale, PARETO_SHAPE)`.
pub fn pareto_noise<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Result<f64> {
    let dist = Pareto::new(scale, PARETO_SHAPE).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sample(rng) - PARETO_SHAPE * scale / (PARETO_SHAPE - 1.0))
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Generated> {
    if spec.n < 10 {
        return Err(invalid(format!("synthetic datasets need n >= 10, got {}", spec.n)));
    }
    if spec.d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(invalid(format!("noise {} must be finite and nonnegative", spec.noise)));
    }
    let mut rng = substream(seed, Stream::Data);
    let (n, d) = (spec.n, spec.d);
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let (task, theta) = match spec.kind {
        SyntheticKind::Normal | SyntheticKind::Pareto => {
            let theta: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            for _ in 0..n {
                let x: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
                let signal: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
                let eps = match spec.kind {
                    SyntheticKind::Normal => spec.noise * normal(&mut rng),
                    _ if spec.noise == 0.0 => 0.0,
                    _ => pareto_noise(&mut rng, spec.noise)?,
                };
                rows.push(x);
                targets.push(signal + eps);
            }
            (Task::Regression, Some(theta))
        }
        SyntheticKind::Sinc => {
            if d != 1 {
                return Err(invalid("the sinc dataset is one-dimensional"));
            }
            for _ in 0..n {
                let x: f64 = rng.random_range(-5.0..=5.0);
                let px = std::f64::consts::PI * x;
                let clean = if px == 0.0 { 1.0 } else { px.sin() / px };
                rows.push(vec![x]);
                targets.push(clean + spec.noise * normal(&mut rng));
            }
            (Task::Regression, None)
        }
        SyntheticKind::TwoGaussians => {
            if !(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0) {
                return Err(invalid("positive_fraction must lie in (0, 1)"));
            }
            if !(spec.separation.is_finite() && spec.separation >= 0.0) {
                return Err(invalid("separation must be finite and nonnegative"));
            }
            // class means at +-(separation / 2) along the diagonal direction
            let dir = vec![1.0 / (d as f64).sqrt(); d];
            let half = 0.5 * spec.separation;
            for _ in 0..n {
                let y = if rng.random::<f64>() < spec.positive_fraction { 1.0 } else { -1.0 };
                let x: Vec<f64> = dir.iter().map(|u| y * half * u + spec.noise * normal(&mut rng)).collect();
                rows.push(x);
                targets.push(y);
            }
            (Task::Binary, Some(dir))
        }
    };
    let data = Dataset::from_rows(rows, targets, task).map_err(Error::from)?;
    Ok(Generated {
        data,
        theta_true: theta,
    })
}
