//! The `summarize` command: per-dataset score tables over seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use adacvar_core::experiment::SplitMetrics;
use adacvar_core::EvalMetrics;

use crate::error::{CliError, CliResult};
use crate::record::{read_records, RunRecord, SCHEMA_VERSION};

/// Mean, spread and normalized score of one algorithm on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub sd: f64,
    /// `sd / max_a mean_a` over the algorithms of the dataset.
    pub sd_normalized: f64,
    /// `(mean - min_a mean_a) / (max_a mean_a - min_a mean_a)`, 0 when all
    /// means coincide.
    pub normalized: f64,
    /// Value per seed, keyed by seed for paired comparisons.
    pub per_seed: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub algorithms: Vec<String>,
    pub seeds: Vec<u64>,
    /// metric -> algorithm -> cell
    pub metrics: BTreeMap<String, BTreeMap<String, ScoreCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRun {
    pub dataset: String,
    pub algorithm: String,
    pub seed: u64,
    pub step: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub schema_version: u32,
    pub datasets: BTreeMap<String, DatasetSummary>,
    pub excluded: Vec<ExcludedRun>,
}

/// Min-max normalization with the degenerate range mapped to 0.
pub fn normalize_scores(means: &[f64]) -> Vec<f64> {
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    means
        .iter()
        .map(|m| if range > 0.0 { (m - min) / range } else { 0.0 })
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn push_split(out: &mut Vec<(String, f64)>, split: &str, m: &EvalMetrics) {
    out.push((format!("{split}.mean_loss"), m.mean_loss));
    out.push((format!("{split}.cvar"), m.cvar));
    if let Some(a) = m.accuracy {
        out.push((format!("{split}.accuracy"), a));
    }
    if let Some(p) = m.min_class_precision {
        out.push((format!("{split}.min_class_precision"), p));
    }
}

/// Named scalar metrics of a final record.
pub fn metric_values(metrics: &SplitMetrics) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    push_split(&mut out, "train", &metrics.train);
    push_split(&mut out, "val", &metrics.val);
    push_split(&mut out, "test", &metrics.test);
    out
}

/// Builds the summary from the final and failure records; epoch records
/// are ignored. Failed runs are an error unless `exclude_failed`.
pub fn summarize_records(records: &[RunRecord], exclude_failed: bool) -> CliResult<ScoreSummary> {
    // dataset -> metric -> algorithm -> seed -> value
    type Values = BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<u64, f64>>>>;
    let mut values: Values = BTreeMap::new();
    let mut seen: BTreeMap<(String, String, u64), String> = BTreeMap::new();
    let mut algorithms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut seeds: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    let mut excluded = Vec::new();
    for r in records {
        let run = r.run();
        let key = (run.dataset.clone(), run.algorithm.clone(), run.seed);
        match r {
            RunRecord::Epoch { .. } => continue,
            RunRecord::Failure { step, error, .. } => {
                if !exclude_failed {
                    return Err(CliError::Runtime(format!(
                        "run {}/{}/seed {} failed ({error}); pass --exclude-failed to drop failed runs",
                        key.0, key.1, key.2
                    )));
                }
                excluded.push(ExcludedRun {
                    dataset: key.0,
                    algorithm: key.1,
                    seed: key.2,
                    step: *step,
                    error: error.clone(),
                });
                continue;
            }
            RunRecord::Final { metrics, .. } => {
                if let Some(prev) = seen.insert(key.clone(), run.config_hash.clone()) {
                    let what = if prev == run.config_hash {
                        "duplicate run"
                    } else {
                        "two configurations"
                    };
                    return Err(CliError::Runtime(format!(
                        "{what} for {}/{}/seed {}",
                        key.0, key.1, key.2
                    )));
                }
                algorithms.entry(key.0.clone()).or_default().insert(key.1.clone());
                seeds.entry(key.0.clone()).or_default().insert(key.2);
                for (name, v) in metric_values(metrics) {
                    values
                        .entry(key.0.clone())
                        .or_default()
                        .entry(name)
                        .or_default()
                        .entry(key.1.clone())
                        .or_default()
                        .insert(key.2, v);
                }
            }
        }
    }
    excluded.sort_by(|a, b| (&a.dataset, &a.algorithm, a.seed).cmp(&(&b.dataset, &b.algorithm, b.seed)));

    let mut datasets = BTreeMap::new();
    for (dataset, by_metric) in values {
        let mut metrics = BTreeMap::new();
        for (metric, by_alg) in by_metric {
            let stats: Vec<(String, f64, f64, BTreeMap<u64, f64>)> = by_alg
                .into_iter()
                .map(|(alg, per_seed)| {
                    let v: Vec<f64> = per_seed.values().copied().collect();
                    let (m, sd) = mean_sd(&v);
                    (alg, m, sd, per_seed)
                })
                .collect();
            let means: Vec<f64> = stats.iter().map(|s| s.1).collect();
            let normalized = normalize_scores(&means);
            let max_mean = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let cells = stats
                .into_iter()
                .zip(normalized)
                .map(|((alg, mean, sd, per_seed), normalized)| {
                    let cell = ScoreCell {
                        n: per_seed.len(),
                        mean,
                        sd,
                        sd_normalized: if max_mean != 0.0 { sd / max_mean } else { 0.0 },
                        normalized,
                        per_seed,
                    };
                    (alg, cell)
                })
                .collect();
            metrics.insert(metric, cells);
        }
        datasets.insert(
            dataset.clone(),
            DatasetSummary {
                algorithms: algorithms[&dataset].iter().cloned().collect(),
                seeds: seeds[&dataset].iter().copied().collect(),
                metrics,
            },
        );
    }
    Ok(ScoreSummary {
        schema_version: SCHEMA_VERSION,
        datasets,
        excluded,
    })
}

/// Expands the patterns into a sorted, de-duplicated list of files.
pub fn expand_patterns(patterns: &[String]) -> CliResult<Vec<PathBuf>> {
    let mut paths = BTreeSet::new();
    for p in patterns {
        let entries = glob::glob(p).map_err(|e| CliError::Config(format!("pattern {p:?}: {e}")))?;
        for e in entries {
            let path = e.map_err(|e| CliError::Runtime(e.to_string()))?;
            if path.is_file() {
                paths.insert(path);
            }
        }
    }
    if paths.is_empty() {
        return Err(CliError::Runtime(format!("no record files match {patterns:?}")));
    }
    Ok(paths.into_iter().collect())
}

pub fn summarize_files(patterns: &[String], exclude_failed: bool) -> CliResult<ScoreSummary> {
    let mut records = Vec::new();
    for p in expand_patterns(patterns)? {
        records.extend(read_records(&p)?);
    }
    summarize_records(&records, exclude_failed)
}

/// Long-format rows `(dataset, algorithm, metric, seed, value)`.
pub fn write_tidy_csv(summary: &ScoreSummary, out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "algorithm", "metric", "seed", "value"])?;
    for (dataset, ds) in &summary.datasets {
        for (metric, cells) in &ds.metrics {
            for (alg, cell) in cells {
                for (seed, v) in &cell.per_seed {
                    w.write_record([dataset, alg, metric, &seed.to_string(), &v.to_string()])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(summary: &ScoreSummary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes") + "\n"
}
