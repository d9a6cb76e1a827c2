//! Datasets, synthetic generators, CSV ingestion, preprocessing and
//! distribution-shift transforms.

mod csv_io;
mod preprocess;
mod shift;
mod synthetic;

pub use csv_io::{load_csv, parse_csv, Schema, TaskHint};
pub use preprocess::{split, standardize, SplitSpec, Standardizer};
pub use shift::{apply_shift, rebalance, Rebalance, ShiftKind, ShiftSpec, ShiftTarget};
pub use synthetic::{gen_synthetic, pareto_noise, Generated, SyntheticKind, SyntheticSpec, PARETO_SHAPE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset has no examples")]
    Empty,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    Unparseable { row: usize, column: String, value: String },
    #[error("row {row}: label '{value}' is not valid for this task")]
    BadLabel { row: usize, value: String },
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("non-finite value at row {row}, feature {col}")]
    NonFinite { row: usize, col: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema: {0}")]
    Schema(#[from] serde_json::Error),
}

/// Learning task of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    Regression,
    /// Labels in {-1, +1}.
    Binary,
    /// Labels in {0, .., classes - 1}.
    Multiclass { classes: usize },
}

impl Task {
    pub fn is_classification(&self) -> bool {
        !matches!(self, Task::Regression)
    }

    pub fn num_classes(&self) -> Option<usize> {
        match *self {
            Task::Regression => None,
            Task::Binary => Some(2),
            Task::Multiclass { classes } => Some(classes),
        }
    }
}

/// Whether standardization applies to a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Continuous,
    OneHot,
}

/// Row-major feature matrix with targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    dim: usize,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    task: Task,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        targets: Vec<f64>,
        dim: usize,
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        task: Task,
    ) -> Result<Self, DataError> {
        let n = targets.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        if features.len() != n * dim {
            return Err(DataError::Ragged {
                row: features.len() / dim.max(1),
                expected: n * dim,
                found: features.len(),
            });
        }
        if feature_names.len() != dim || feature_kinds.len() != dim {
            return Err(DataError::Ragged {
                row: 0,
                expected: dim,
                found: feature_names.len().min(feature_kinds.len()),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        for (row, &y) in targets.iter().enumerate() {
            let ok = match task {
                Task::Regression => y.is_finite(),
                Task::Binary => y == 1.0 || y == -1.0,
                Task::Multiclass { classes } => y >= 0.0 && y.fract() == 0.0 && (y as usize) < classes,
            };
            if !ok {
                return Err(DataError::BadLabel {
                    row,
                    value: y.to_string(),
                });
            }
        }
        Ok(Self {
            features,
            targets,
            dim,
            feature_names,
            feature_kinds,
            task,
        })
    }

    /// All-continuous dataset with generated feature names.
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>, task: Task) -> Result<Self, DataError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(DataError::Ragged {
                    row: i,
                    expected: dim,
                    found: r.len(),
                });
            }
            features.extend_from_slice(r);
        }
        let names = (0..dim).map(|j| format!("x{j}")).collect();
        Self::new(features, targets, dim, names, vec![FeatureKind::Continuous; dim], task)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    /// Class index of example `i`: `-1 -> 0`, `+1 -> 1` for binary tasks.
    pub fn class_of(&self, i: usize) -> Option<usize> {
        match self.task {
            Task::Regression => None,
            Task::Binary => Some(usize::from(self.targets[i] > 0.0)),
            Task::Multiclass { .. } => Some(self.targets[i] as usize),
        }
    }

    /// Example count per class.
    pub fn class_counts(&self) -> Option<Vec<usize>> {
        let c = self.task.num_classes()?;
        let mut counts = vec![0; c];
        for i in 0..self.len() {
            counts[self.class_of(i)?] += 1;
        }
        Some(counts)
    }

    /// New dataset made of the given rows, in order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Self::new(
            features,
            targets,
            self.dim,
            self.feature_names.clone(),
            self.feature_kinds.clone(),
            self.task,
        )
    }

    /// Relabels a multiclass dataset as binary: `positive` becomes `+1`,
    /// every other class `-1`.
    pub fn binarize(&self, positive: usize) -> Result<Self, DataError> {
        let Task::Multiclass { classes } = self.task else {
            return Ok(self.clone());
        };
        if positive >= classes {
            return Err(DataError::BadLabel {
                row: 0,
                value: positive.to_string(),
            });
        }
        let targets = self
            .targets
            .iter()
            .map(|&y| if y as usize == positive { 1.0 } else { -1.0 })
            .collect();
        Self::new(
            self.features.clone(),
            targets,
            self.dim,
            self.feature_names.clone(),
            self.feature_kinds.clone(),
            Task::Binary,
        )
    }
}
