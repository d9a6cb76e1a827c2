//! Metrics records, one JSON object per line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use adacvar_core::algorithms::EllSummary;
use adacvar_core::experiment::SplitMetrics;
use adacvar_core::sampler::SamplerSnapshot;
use adacvar_core::{LossKind, LossSpec, ModelParams, Standardizer, Task};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Identifies the run a record belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunHeader {
    pub config_hash: String,
    pub dataset: String,
    pub algorithm: String,
    pub alpha: f64,
    pub eval_alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunRecord {
    Epoch {
        schema_version: u32,
        run: RunHeader,
        epoch: usize,
        step: usize,
        metrics: SplitMetrics,
        ell: Option<f64>,
    },
    Final {
        schema_version: u32,
        run: RunHeader,
        steps: usize,
        wall_clock_s: f64,
        clip_events: u64,
        zero_grad_steps: usize,
        loss_kind: LossKind,
        scale: f64,
        ell: Option<EllSummary>,
        selected_step: Option<usize>,
        best_epoch: Option<usize>,
        n_train: usize,
        n_val: usize,
        n_test: usize,
        initial: SplitMetrics,
        metrics: SplitMetrics,
        sampler: Option<SamplerSnapshot>,
    },
    Failure {
        schema_version: u32,
        run: RunHeader,
        step: Option<usize>,
        error: String,
        wall_clock_s: f64,
    },
}

impl RunRecord {
    pub fn run(&self) -> &RunHeader {
        match self {
            RunRecord::Epoch { run, .. } | RunRecord::Final { run, .. } | RunRecord::Failure { run, .. } => run,
        }
    }

    pub fn schema_version(&self) -> u32 {
        match self {
            RunRecord::Epoch { schema_version, .. }
            | RunRecord::Final { schema_version, .. }
            | RunRecord::Failure { schema_version, .. } => *schema_version,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// Parses one line and checks the schema version.
pub fn parse_record(line: &str) -> CliResult<RunRecord> {
    let r: RunRecord = serde_json::from_str(line).map_err(|e| CliError::Runtime(format!("invalid record: {e}")))?;
    if r.schema_version() != SCHEMA_VERSION {
        return Err(CliError::Runtime(format!(
            "record schema version {} (expected {SCHEMA_VERSION})",
            r.schema_version()
        )));
    }
    Ok(r)
}

/// Reads every non-empty line of a JSONL file.
pub fn read_records(path: &Path) -> CliResult<Vec<RunRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = parse_record(&line).map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_record(out: &mut impl Write, record: &RunRecord) -> std::io::Result<()> {
    writeln!(out, "{}", record.to_line())
}

/// Trained model with everything needed to score raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub run: RunHeader,
    pub task: Task,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub loss: LossSpec,
    pub params: ModelParams,
}

impl ModelFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read model {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("model file at `{}`: {}", e.path(), e.inner())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adacvar_core::EvalMetrics;

    fn metrics(v: f64) -> SplitMetrics {
        let m = EvalMetrics {
            mean_loss: v,
            cvar: 0.1 + v / 3.0,
            alpha: 0.1,
            accuracy: Some(0.7),
            min_class_precision: None,
        };
        SplitMetrics {
            train: m.clone(),
            val: m.clone(),
            test: m,
        }
    }

    fn header() -> RunHeader {
        RunHeader {
            config_hash: "ab".into(),
            dataset: "normal".into(),
            algorithm: "mean".into(),
            alpha: 0.1,
            eval_alpha: 0.1,
            seed: 3,
        }
    }

    #[test]
    fn records_round_trip_losslessly() {
        let recs = vec![
            RunRecord::Epoch {
                schema_version: SCHEMA_VERSION,
                run: header(),
                epoch: 1,
                step: 10,
                metrics: metrics(0.123456789012345678),
                ell: Some(1.0 / 3.0),
            },
            RunRecord::Failure {
                schema_version: SCHEMA_VERSION,
                run: header(),
                step: Some(4),
                error: "boom".into(),
                wall_clock_s: 0.25,
            },
        ];
        for r in recs {
            assert_eq!(parse_record(&r.to_line()).unwrap(), r);
        }
    }

    #[test]
    fn unknown_fields_and_versions_rejected() {
        let line = RunRecord::Failure {
            schema_version: SCHEMA_VERSION,
            run: header(),
            step: None,
            error: String::new(),
            wall_clock_s: 0.0,
        }
        .to_line();
        let extra = line.replacen('{', r#"{"extra": 1, "#, 1);
        assert!(parse_record(&extra).is_err());
        let old = line.replace(r#""schema_version":1"#, r#""schema_version":0"#);
        assert!(parse_record(&old).is_err());
    }
}
