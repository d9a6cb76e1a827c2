use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Task};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShiftKind {
    #[default]
    None,
    /// Subsample the majority class of a binary task until it makes up
    /// `ratio` of the result.
    BinaryImbalanceInvert { ratio: f64 },
    /// Class of size rank `c` (1 = largest) keeps about `n_1 c^{ln beta}` examples.
    PowerLaw { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftTarget {
    #[default]
    Train,
    Test,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rebalance {
    #[default]
    None,
    Upsample,
    Downsample,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSpec {
    #[serde(flatten)]
    pub kind: ShiftKind,
    pub target: ShiftTarget,
    /// Applied to the training split after the shift.
    pub rebalance: Rebalance,
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ShiftKind::BinaryImbalanceInvert { ratio } if !(ratio > 0.0 && ratio <= 0.5) => {
                Err(invalid(format!("shift ratio {ratio} outside (0, 0.5]")))
            }
            ShiftKind::PowerLaw { beta } if !(beta > 0.0 && beta.is_finite()) => {
                Err(invalid(format!("power-law beta {beta} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn applies_to_train(&self) -> bool {
        matches!(self.target, ShiftTarget::Train | ShiftTarget::Both)
    }

    pub fn applies_to_test(&self) -> bool {
        matches!(self.target, ShiftTarget::Test | ShiftTarget::Both)
    }
}

fn class_members(data: &Dataset) -> Result<Vec<Vec<usize>>> {
    let c = data
        .task()
        .num_classes()
        .ok_or_else(|| invalid("class shifts need a classification task"))?;
    let mut members = vec![Vec::new(); c];
    for i in 0..data.len() {
        members[data.class_of(i).expect("classification")].push(i);
    }
    Ok(members)
}

/// `m` members chosen uniformly without replacement, in original order.
fn keep<R: Rng + ?Sized>(rng: &mut R, members: &[usize], m: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = sample(rng, members.len(), m).into_iter().map(|j| members[j]).collect();
    picked.sort_unstable();
    picked
}

/// Subsamples classes according to `kind`. Every output row is an input row.
pub fn apply_shift<R: Rng + ?Sized>(data: &Dataset, kind: &ShiftKind, rng: &mut R) -> Result<Dataset> {
    let members = match kind {
        ShiftKind::None => return Ok(data.clone()),
        _ => class_members(data)?,
    };
    let retained: Vec<usize> = match *kind {
        ShiftKind::None => unreachable!(),
        ShiftKind::BinaryImbalanceInvert { ratio } => {
            if data.task() != Task::Binary {
                return Err(invalid("imbalance inversion needs a binary task"));
            }
            if !(ratio > 0.0 && ratio <= 0.5) {
                return Err(invalid(format!("shift ratio {ratio} outside (0, 0.5]")));
            }
            // ties: the positive class counts as the majority
            let (maj, min) = if members[1].len() >= members[0].len() { (1, 0) } else { (0, 1) };
            let target = (ratio * members[min].len() as f64 / (1.0 - ratio)).round() as usize;
            if target == 0 {
                return Err(invalid("shift would remove the whole majority class"));
            }
            let mut out = keep(rng, &members[maj], target.min(members[maj].len()));
            out.extend_from_slice(&members[min]);
            out
        }
        ShiftKind::PowerLaw { beta } => {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(invalid(format!("power-law beta {beta} must be positive")));
            }
            let mut order: Vec<usize> = (0..members.len()).filter(|&c| !members[c].is_empty()).collect();
            order.sort_by_key(|&c| std::cmp::Reverse(members[c].len()));
            let anchor = members[order[0]].len() as f64;
            let mut out = Vec::new();
            for (rank, &c) in order.iter().enumerate() {
                let size = (anchor * ((rank + 1) as f64).powf(beta.ln())).round() as usize;
                out.extend(keep(rng, &members[c], size.clamp(1, members[c].len())));
            }
            out
        }
    };
    let mut retained = retained;
    retained.sort_unstable();
    Ok(data.subset(&retained)?)
}

/// Equalizes class counts by duplicating (upsample, with replacement) or
/// dropping (downsample) examples.
pub fn rebalance<R: Rng + ?Sized>(data: &Dataset, mode: Rebalance, rng: &mut R) -> Result<Dataset> {
    if mode == Rebalance::None {
        return Ok(data.clone());
    }
    let members: Vec<Vec<usize>> = class_members(data)?.into_iter().filter(|m| !m.is_empty()).collect();
    let mut out = Vec::new();
    match mode {
        Rebalance::None => unreachable!(),
        Rebalance::Upsample => {
            let top = members.iter().map(Vec::len).max().unwrap_or(0);
            out.extend(0..data.len());
            for m in &members {
                for _ in m.len()..top {
                    out.push(m[rng.random_range(0..m.len())]);
                }
            }
        }
        Rebalance::Downsample => {
            let bottom = members.iter().map(Vec::len).min().unwrap_or(0);
            for m in &members {
                out.extend(keep(rng, m, bottom));
            }
            out.sort_unstable();
        }
    }
    Ok(data.subset(&out)?)
}
