//! Command-line front end: configuration handling, run records, score
//! summaries and the sampler benchmarks.

pub mod bench;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod gen_data;
pub mod record;
pub mod summarize;
pub mod train;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

pub use adacvar_core;
use adacvar_core::data::SyntheticSpec;
use adacvar_core::experiment::{prepare, SamplerSettings, ScheduleName};
use adacvar_core::sim::{marginals_bench, regret_bench, LossModel, TailSize};
use adacvar_core::SyntheticKind;

use crate::config::{apply_overrides, load_config, Overrides, SEED_ENV};
pub use crate::error::{CliError, CliResult};
use crate::evaluate::{evaluate_model, load_raw_for_model};
use crate::record::{ModelFile, RunRecord};

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "adacvar", version, about = "Adaptive-sampling CVaR optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train from a JSON configuration and write metrics records and a model.
    Train(TrainArgs),
    /// Score a saved model: mean loss, CVaR at several levels, accuracy.
    Evaluate(EvaluateArgs),
    /// Sampler regret under synthetic loss sequences.
    RegretBench(RegretArgs),
    /// Gap between exact and approximate k-DPP marginals.
    MarginalsBench(MarginalsArgs),
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Aggregate final records into per-dataset score tables.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured seed and the environment variable.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Runs once per listed seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Worker threads for multi-seed runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Also write per-step records.
    #[arg(long)]
    pub trace: bool,
    /// Do not echo records on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["data", "config"]))]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Raw CSV scored with the model's standardization.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub schema: Option<PathBuf>,
    /// Experiment configuration whose prepared split is scored.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test", requires = "config")]
    pub split: SplitName,
    #[arg(long, requires = "config")]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.5,1")]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossModelName {
    Constant,
    TopkBernoulli,
    Switching,
}

#[derive(Debug, Args)]
pub struct RegretArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    pub horizons: Vec<usize>,
    #[arg(long, value_enum, default_value = "topk-bernoulli")]
    pub loss_model: LossModelName,
    #[arg(long, default_value_t = 0.8)]
    pub p_high: f64,
    #[arg(long, default_value_t = 0.4)]
    pub p_low: f64,
    /// Loss of every item for the constant model.
    #[arg(long, default_value_t = 0.5)]
    pub value: f64,
    /// Rounds between redraws for the switching model.
    #[arg(long, default_value_t = 1000)]
    pub period: usize,
    #[arg(long, value_parser = parse_serde::<ScheduleName>, default_value = "fixed-horizon")]
    pub schedule: ScheduleName,
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta0: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MarginalsArgs {
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,500,1000")]
    pub ns: Vec<usize>,
    /// `k = floor(alpha N)`; ignored when `--k` is given.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long)]
    pub k: Option<usize>,
    /// Spread of the log-weights.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_parser = parse_serde::<SyntheticKind>)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub positive_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Glob patterns of record files.
    #[arg(required = true)]
    pub patterns: Vec<String>,
    /// Drop runs that ended in a failure record instead of refusing.
    #[arg(long)]
    pub exclude_failed: bool,
    /// Also write long-format rows for plotting.
    #[arg(long)]
    pub tidy_csv: Option<PathBuf>,
    /// Summary file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let mut config = load_config(&args.config)?;
    let flags = Overrides {
        seed: args.seed,
        output_dir: args.output_dir.clone(),
    };
    apply_overrides(&mut config, env_seed().as_deref(), &flags)?;
    let seeds = args.seeds.clone().unwrap_or_else(|| vec![config.seed]);
    let quiet = args.quiet;
    let echo = move |r: &RunRecord| {
        if !quiet {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", r.to_line());
        }
    };
    let data_base = base_dir(&args.config);
    let results = train::train_seeds(&config, &seeds, args.jobs, &data_base, Path::new("."), args.trace, &echo);
    let mut worst: Option<CliError> = None;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(files) => eprintln!("seed {seed}: wrote {}", files.records.display()),
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                    worst = Some(e);
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let model = ModelFile::read(&args.model)?;
    evaluate::check_alphas(&args.alphas)?;
    let data = match (&args.data, &args.config) {
        (Some(path), _) => load_raw_for_model(&model, path, args.schema.as_deref())?,
        (None, Some(cfg)) => {
            let mut config = load_config(cfg)?;
            let flags = Overrides {
                seed: args.seed,
                output_dir: None,
            };
            apply_overrides(&mut config, env_seed().as_deref(), &flags)?;
            let raw = config.dataset.load(&base_dir(cfg), config.seed)?;
            let p = prepare(&config.dataset, &raw, config.seed).map_err(CliError::config)?;
            match args.split {
                SplitName::Train => p.train,
                SplitName::Val => p.val,
                SplitName::Test => p.test,
            }
        }
        (None, None) => return Err(CliError::Config("one of --data or --config is required".into())),
    };
    print_json(&evaluate_model(&model, &data, &args.alphas)?)
}

pub fn regret_loss_model(args: &RegretArgs) -> LossModel {
    match args.loss_model {
        LossModelName::Constant => LossModel::Constant { value: args.value },
        LossModelName::TopkBernoulli => LossModel::TopkBernoulli {
            p_high: args.p_high,
            p_low: args.p_low,
        },
        LossModelName::Switching => LossModel::Switching {
            p_high: args.p_high,
            p_low: args.p_low,
            period: args.period,
        },
    }
}

pub fn cmd_regret_bench(args: &RegretArgs) -> CliResult<()> {
    let sampler = SamplerSettings {
        schedule: args.schedule,
        gamma: args.gamma,
        eta0: args.eta0,
    }
    .to_config();
    let table = regret_bench(args.n, args.k, &args.horizons, sampler, &regret_loss_model(args), &args.seeds)
        .map_err(CliError::config)?;
    if args.json {
        print_json(&table)
    } else {
        print!("{}", bench::regret_text(&table));
        Ok(())
    }
}

pub fn cmd_marginals_bench(args: &MarginalsArgs) -> CliResult<()> {
    let tail = args.k.map_or(TailSize::Alpha(args.alpha), TailSize::Count);
    let rows = marginals_bench(&args.ns, tail, args.sigma, &args.seeds).map_err(CliError::config)?;
    if args.json {
        print_json(&rows)
    } else {
        print!("{}", bench::marginals_text(&rows));
        Ok(())
    }
}

pub fn cmd_gen_data(args: &GenDataArgs) -> CliResult<()> {
    let mut spec = SyntheticSpec::new(args.kind, args.n, args.d);
    if let Some(v) = args.noise {
        spec.noise = v;
    }
    if let Some(v) = args.separation {
        spec.separation = v;
    }
    if let Some(v) = args.positive_fraction {
        spec.positive_fraction = v;
    }
    match &args.out {
        Some(p) => {
            let n = gen_data::gen_data(&spec, args.seed, std::fs::File::create(p)?)?;
            eprintln!("wrote {n} rows to {}", p.display());
        }
        None => {
            gen_data::gen_data(&spec, args.seed, std::io::stdout().lock())?;
        }
    }
    Ok(())
}

pub fn cmd_summarize(args: &SummarizeArgs) -> CliResult<()> {
    let summary = summarize::summarize_files(&args.patterns, args.exclude_failed)?;
    if let Some(p) = &args.tidy_csv {
        summarize::write_tidy_csv(&summary, std::fs::File::create(p)?)?;
    }
    let text = summarize::to_json(&summary);
    match &args.output {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::RegretBench(a) => cmd_regret_bench(a),
        Command::MarginalsBench(a) => cmd_marginals_bench(a),
        Command::GenData(a) => cmd_gen_data(a),
        Command::Summarize(a) => cmd_summarize(a),
    }
}
