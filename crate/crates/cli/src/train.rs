//! The `train` command: one run per seed, each writing its own files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use adacvar_core::algorithms::train;
use adacvar_core::experiment::{evaluate_splits, prepare};
use adacvar_core::{Error as CoreError, ExperimentConfig, ModelParams, RiskLevel};

use crate::config::config_hash;
use crate::error::{CliError, CliResult};
use crate::record::{write_record, ModelFile, RunHeader, RunRecord, SCHEMA_VERSION};

pub const DEFAULT_OUTPUT_DIR: &str = "runs";

/// Files written by one run.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub records: PathBuf,
    pub model: PathBuf,
    pub trace: Option<PathBuf>,
}

pub fn output_dir(config: &ExperimentConfig, base: &Path) -> PathBuf {
    base.join(config.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)))
}

fn header(config: &ExperimentConfig) -> RunHeader {
    RunHeader {
        config_hash: config_hash(config),
        dataset: config.dataset.label(),
        algorithm: config.algorithm.name().to_string(),
        alpha: config.alpha,
        eval_alpha: config.eval_alpha(),
        seed: config.seed,
    }
}

/// Common stem of the files of a run.
pub fn run_stem(header: &RunHeader) -> String {
    format!(
        "{}-{}-{}-seed{}",
        header.dataset,
        header.algorithm,
        &header.config_hash[..8],
        header.seed
    )
}

/// Runs one configuration. Relative dataset paths resolve against
/// `data_base`, the output directory against `out_base`. Every record is
/// also passed to `echo`.
pub fn train_run(
    config: &ExperimentConfig,
    data_base: &Path,
    out_base: &Path,
    with_trace: bool,
    echo: &(dyn Fn(&RunRecord) + Sync),
) -> CliResult<RunFiles> {
    config.validate().map_err(CliError::config)?;
    let run = header(config);
    let start = Instant::now();
    let raw = config.dataset.load(data_base, config.seed).map_err(|e| match e {
        CoreError::Config(m) => CliError::Config(m),
        other => CliError::Runtime(format!("loading dataset: {other}")),
    })?;
    let prepared = prepare(&config.dataset, &raw, config.seed).map_err(|e| match e {
        CoreError::Data(d) => CliError::Runtime(d.to_string()),
        other => CliError::Config(format!("dataset: {other}")),
    })?;
    let n_train = prepared.train.len();
    RiskLevel::new(config.alpha, n_train).map_err(|e| CliError::Config(format!("alpha: {e}")))?;
    let mut tc = config.train_config(n_train);
    tc.record_steps = with_trace;
    tc.validate().map_err(CliError::config)?;
    let eval_alpha = config.eval_alpha();
    let initial = evaluate_splits(&ModelParams::zeros(prepared.train.dim()), &prepared, eval_alpha)?;

    let dir = output_dir(config, out_base);
    std::fs::create_dir_all(&dir)?;
    let stem = run_stem(&run);
    let records_path = dir.join(format!("{stem}.jsonl"));
    let mut out = BufWriter::new(File::create(&records_path)?);
    let mut emit = |r: RunRecord| -> CliResult<()> {
        write_record(&mut out, &r)?;
        out.flush()?;
        echo(&r);
        Ok(())
    };

    let output = match train(&prepared.train, Some(&prepared.val), &prepared.loss, &tc) {
        Ok(o) => o,
        Err(e) => {
            let step = match e {
                CoreError::Numeric { step } => Some(step),
                _ => None,
            };
            emit(RunRecord::Failure {
                schema_version: SCHEMA_VERSION,
                run: run.clone(),
                step,
                error: e.to_string(),
                wall_clock_s: start.elapsed().as_secs_f64(),
            })?;
            return Err(e.into());
        }
    };

    for e in &output.trace.epochs {
        emit(RunRecord::Epoch {
            schema_version: SCHEMA_VERSION,
            run: run.clone(),
            epoch: e.epoch,
            step: e.step,
            metrics: evaluate_splits(&e.params, &prepared, eval_alpha)?,
            ell: e.ell,
        })?;
    }
    let metrics = evaluate_splits(&output.params, &prepared, eval_alpha)?;
    let trace = &output.trace;
    emit(RunRecord::Final {
        schema_version: SCHEMA_VERSION,
        run: run.clone(),
        steps: trace.steps_run,
        wall_clock_s: start.elapsed().as_secs_f64(),
        clip_events: trace.clip_events,
        zero_grad_steps: trace.zero_grad_steps,
        loss_kind: prepared.loss.kind,
        scale: prepared.loss.scale,
        ell: trace.ell,
        selected_step: trace.selected_step,
        best_epoch: trace.best_epoch,
        n_train,
        n_val: prepared.val.len(),
        n_test: prepared.test.len(),
        initial,
        metrics,
        sampler: output.sampler.clone(),
    })?;

    let model_path = dir.join(format!("{stem}.model.json"));
    let model = ModelFile {
        schema_version: SCHEMA_VERSION,
        run,
        task: prepared.train.task(),
        feature_names: prepared.train.feature_names().to_vec(),
        standardizer: prepared.standardizer.clone(),
        loss: prepared.loss,
        params: output.params.clone(),
    };
    std::fs::write(&model_path, serde_json::to_string_pretty(&model)? + "\n")?;

    let trace_path = if with_trace {
        let p = dir.join(format!("{stem}.trace.jsonl"));
        let mut w = BufWriter::new(File::create(&p)?);
        for s in &trace.steps {
            writeln!(w, "{}", serde_json::to_string(s)?)?;
        }
        w.flush()?;
        Some(p)
    } else {
        None
    };
    Ok(RunFiles {
        records: records_path,
        model: model_path,
        trace: trace_path,
    })
}

/// Runs the configuration once per seed on up to `jobs` worker threads.
/// Results come back in seed order.
pub fn train_seeds(
    config: &ExperimentConfig,
    seeds: &[u64],
    jobs: usize,
    data_base: &Path,
    out_base: &Path,
    with_trace: bool,
    echo: &(dyn Fn(&RunRecord) + Sync),
) -> Vec<CliResult<RunFiles>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<RunFiles>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, seeds.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let mut c = config.clone();
                c.seed = seeds[i];
                let r = train_run(&c, data_base, out_base, with_trace, echo);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect()
}
