//! The `evaluate` command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use adacvar_core::data::load_csv;
use adacvar_core::metrics::{cvar_profile, evaluate};
use adacvar_core::{Dataset, Schema, Task};

use crate::error::{CliError, CliResult};
use crate::record::ModelFile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvarAt {
    pub alpha: f64,
    pub cvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub mean_loss: f64,
    /// In the order the levels were given.
    pub cvar: Vec<CvarAt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_class_precision: Option<f64>,
}

pub fn check_alphas(alphas: &[f64]) -> CliResult<()> {
    if alphas.is_empty() {
        return Err(CliError::Config("at least one alpha is required".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(CliError::Config(format!("alpha {a} outside (0, 1]")));
    }
    Ok(())
}

/// Scores already standardized data.
pub fn evaluate_model(model: &ModelFile, data: &Dataset, alphas: &[f64]) -> CliResult<EvalReport> {
    check_alphas(alphas)?;
    if data.dim() != model.params.dim() {
        return Err(CliError::Config(format!(
            "data has {} features, model expects {}",
            data.dim(),
            model.params.dim()
        )));
    }
    let base = evaluate(&model.params, data, &model.loss, alphas[0])?;
    let values = cvar_profile(&model.params, data, &model.loss, alphas)?;
    Ok(EvalReport {
        n: data.len(),
        mean_loss: base.mean_loss,
        cvar: alphas
            .iter()
            .zip(values)
            .map(|(&alpha, cvar)| CvarAt { alpha, cvar })
            .collect(),
        accuracy: base.accuracy,
        min_class_precision: base.min_class_precision,
    })
}

/// Loads raw CSV data and standardizes it with the model's statistics.
pub fn load_raw_for_model(model: &ModelFile, path: &Path, schema: Option<&Path>) -> CliResult<Dataset> {
    let schema = match schema {
        Some(p) => Schema::from_path(p).map_err(|e| CliError::Config(format!("schema {}: {e}", p.display())))?,
        None => Schema::default(),
    };
    let mut data = load_csv(path, &schema).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if data.feature_names() != model.feature_names.as_slice() {
        return Err(CliError::Config(format!(
            "feature columns {:?} do not match the model's {:?}",
            data.feature_names(),
            model.feature_names
        )));
    }
    if model.task == Task::Binary && data.task() != Task::Binary {
        return Err(CliError::Config("model is a binary classifier but the data is not binary".into()));
    }
    model.standardizer.apply(&mut data)?;
    Ok(data)
}
