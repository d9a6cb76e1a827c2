use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind};
use crate::error::{invalid, Error, Result};
use crate::rng::{substream, Stream};

/// Per-column affine map fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of every continuous column.
    /// One-hot columns map to themselves; constant columns are only centered.
    pub fn fit(train: &Dataset) -> Self {
        let (n, d) = (train.len() as f64, train.dim());
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            if train.feature_kinds()[j] == FeatureKind::OneHot {
                continue;
            }
            let m = (0..train.len()).map(|i| train.row(i)[j]).sum::<f64>() / n;
            let var = (0..train.len()).map(|i| (train.row(i)[j] - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            if var > 0.0 {
                scale[j] = var.sqrt();
            }
        }
        Self { mean, scale }
    }

    pub fn apply(&self, data: &mut Dataset) -> Result<()> {
        let d = data.dim();
        if d != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: d,
            });
        }
        for row in data.features_mut().chunks_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(())
    }

    /// Transforms a single feature vector.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Fits on `train` and applies to `train` and every dataset in `others`.
pub fn standardize(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<Standardizer> {
    let st = Standardizer::fit(train);
    st.apply(train)?;
    for d in others.iter_mut() {
        st.apply(d)?;
    }
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.5,
            val: 0.3,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    /// Split sizes for `n` examples: train and validation are rounded, test
    /// takes the remainder.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("split fractions {f:?} must be positive and sum to 1")));
        }
        let a = (self.train * n as f64).round() as usize;
        let b = (self.val * n as f64).round() as usize;
        if a == 0 || b == 0 || a + b >= n {
            return Err(invalid(format!("split of {n} examples leaves an empty part")));
        }
        Ok((a, b, n - a - b))
    }
}

/// Seeded shuffle, then contiguous partition into (train, val, test).
pub fn split(data: &Dataset, spec: &SplitSpec, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (a, b, _) = spec.sizes(data.len())?;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut substream(seed, Stream::Split));
    Ok((
        data.subset(&idx[..a])?,
        data.subset(&idx[a..a + b])?,
        data.subset(&idx[a + b..])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;

    fn column(d: &Dataset, j: usize) -> Vec<f64> {
        (0..d.len()).map(|i| d.row(i)[j]).collect()
    }

    #[test]
    fn standardize_examples() {
        let mut train =
            Dataset::from_rows(vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]], vec![0.0; 3], Task::Regression)
                .unwrap();
        let mut test = Dataset::from_rows(vec![vec![4.0, 6.0]], vec![0.0], Task::Regression).unwrap();
        let st = standardize(&mut train, &mut [&mut test]).unwrap();
        let c = column(&train, 0);
        let mean = c.iter().sum::<f64>() / 3.0;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        assert_eq!(column(&train, 1), vec![0.0; 3]);
        // test uses the train statistics
        assert!((test.row(0)[0] - 2.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(test.row(0)[1], 1.0);
        let before = train.clone();
        Standardizer::fit(&train).apply(&mut train).unwrap();
        for (a, b) in train.features().iter().zip(before.features()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(st.scale[1], 1.0);
    }

    #[test]
    fn split_sizes_and_partition() {
        let d = Dataset::from_rows((0..100).map(|i| vec![i as f64]).collect(), vec![0.0; 100], Task::Regression)
            .unwrap();
        let (a, b, c) = split(&d, &SplitSpec::default(), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (50, 30, 20));
        let mut seen: Vec<f64> = [a.features(), b.features(), c.features()].concat();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..100).map(|i| i as f64).collect::<Vec<_>>());
        let (a2, _, _) = split(&d, &SplitSpec::default(), 1).unwrap();
        assert_eq!(a, a2);
        let (a3, _, _) = split(&d, &SplitSpec::default(), 2).unwrap();
        assert_ne!(a, a3);
        let bad = SplitSpec {
            train: 0.5,
            val: 0.5,
            test: 0.1,
        };
        assert!(split(&d, &bad, 1).is_err());
    }
}
