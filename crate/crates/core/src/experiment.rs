//! End-to-end runs: dataset preparation, training and held-out evaluation
//! from one declarative configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{train, Algorithm, IterateSelection, LrDecay, StepOrder, TrainConfig, TrainOutput};
use crate::data::{
    apply_shift, gen_synthetic, load_csv, rebalance, split, standardize, Dataset, Schema, ShiftSpec, SplitSpec,
    Standardizer, SyntheticKind, SyntheticSpec, Task,
};
use crate::error::{Error, Result};
use crate::learners::{fit_scale, LossKind, LossSpec, ModelParams, OptimizerConfig, OptimizerKind};
use crate::metrics::{evaluate, EvalMetrics};
use crate::rng::{substream, Stream};
use crate::sampler::{EtaSchedule, SamplerConfig};

/// Schema given inline or as a path to a JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaRef {
    Path(PathBuf),
    Inline(Schema),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Synthetic family; exclusive with `path`.
    #[serde(default)]
    pub name: Option<SyntheticKind>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<SchemaRef>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub separation: Option<f64>,
    #[serde(default)]
    pub positive_fraction: Option<f64>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub shift: ShiftSpec,
    /// One-vs-rest class for multiclass data.
    #[serde(default)]
    pub positive_class: Option<usize>,
}

fn default_n() -> usize {
    2000
}
fn default_d() -> usize {
    10
}

impl DatasetConfig {
    pub fn synthetic(kind: SyntheticKind, n: usize, d: usize) -> Self {
        Self {
            name: Some(kind),
            path: None,
            schema: None,
            n,
            d,
            noise: None,
            separation: None,
            positive_fraction: None,
            split: SplitSpec::default(),
            shift: ShiftSpec::default(),
            positive_class: None,
        }
    }

    /// Label used to group results.
    pub fn label(&self) -> String {
        match (&self.name, &self.path) {
            (Some(k), _) => serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            (None, Some(p)) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            (None, None) => String::new(),
        }
    }

    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        let kind = self.name?;
        let mut s = SyntheticSpec::new(kind, self.n, self.d);
        if let Some(v) = self.noise {
            s.noise = v;
        }
        if let Some(v) = self.separation {
            s.separation = v;
        }
        if let Some(v) = self.positive_fraction {
            s.positive_fraction = v;
        }
        Some(s)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.name, &self.path) {
            (Some(_), Some(_)) => return Err(Error::Config("dataset: give either `name` or `path`, not both".into())),
            (None, None) => return Err(Error::Config("dataset: one of `name` or `path` is required".into())),
            _ => {}
        }
        self.split.sizes(self.n.max(10)).map_err(|e| Error::Config(format!("dataset.split: {e}")))?;
        self.shift.validate().map_err(|e| Error::Config(format!("dataset.shift: {e}")))?;
        Ok(())
    }

    /// Loads or generates the raw data; relative paths resolve against `base`.
    pub fn load(&self, base: &Path, seed: u64) -> Result<Dataset> {
        self.validate()?;
        if let Some(spec) = self.synthetic_spec() {
            return Ok(gen_synthetic(&spec, seed)?.data);
        }
        let path = base.join(self.path.as_ref().expect("validated"));
        let schema = match &self.schema {
            None => Schema::default(),
            Some(SchemaRef::Inline(s)) => s.clone(),
            Some(SchemaRef::Path(p)) => Schema::from_path(base.join(p))?,
        };
        Ok(load_csv(path, &schema)?)
    }
}

/// Standardized, shifted splits with the normalizing loss.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub standardizer: Standardizer,
    pub loss: LossSpec,
}

/// Default loss for a task.
pub fn loss_kind_for(task: Task) -> Result<LossKind> {
    match task {
        Task::Regression => Ok(LossKind::SquaredNormalized),
        Task::Binary => Ok(LossKind::LogisticNormalized),
        Task::Multiclass { .. } => Err(Error::Config(
            "multiclass data needs `dataset.positive_class` for a binary linear model".into(),
        )),
    }
}

/// Split, shift, binarize, standardize, then fit the loss scale at zero
/// parameters on the training split.
pub fn prepare(config: &DatasetConfig, raw: &Dataset, seed: u64) -> Result<Prepared> {
    let (mut train, mut val, mut test) = split(raw, &config.split, seed)?;
    let shift = &config.shift;
    let mut rng = substream(seed, Stream::Shift);
    // validation data is drawn like the training data
    if shift.applies_to_train() {
        train = apply_shift(&train, &shift.kind, &mut rng)?;
        val = apply_shift(&val, &shift.kind, &mut rng)?;
    }
    if shift.applies_to_test() {
        test = apply_shift(&test, &shift.kind, &mut rng)?;
    }
    train = rebalance(&train, shift.rebalance, &mut rng)?;
    if let Some(c) = config.positive_class {
        train = train.binarize(c)?;
        val = val.binarize(c)?;
        test = test.binarize(c)?;
    }
    let standardizer = standardize(&mut train, &mut [&mut val, &mut test])?;
    let kind = loss_kind_for(train.task())?;
    let loss = fit_scale(&ModelParams::zeros(train.dim()), &train, kind)?;
    Ok(Prepared {
        train,
        val,
        test,
        standardizer,
        loss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    Constant,
    #[default]
    FixedHorizon,
    InverseSqrt,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub schedule: ScheduleName,
    pub gamma: f64,
    pub eta0: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            schedule: ScheduleName::FixedHorizon,
            gamma: 0.01,
            eta0: 0.1,
        }
    }
}

impl SamplerSettings {
    pub fn to_config(self) -> SamplerConfig {
        let schedule = match self.schedule {
            ScheduleName::Constant => EtaSchedule::Constant { eta0: self.eta0 },
            ScheduleName::FixedHorizon => EtaSchedule::FixedHorizon,
            ScheduleName::InverseSqrt => EtaSchedule::InverseSqrt { eta0: self.eta0 },
            ScheduleName::Adaptive => EtaSchedule::Adaptive { eta0: self.eta0 },
        };
        SamplerConfig {
            schedule,
            gamma: self.gamma,
            horizon: None,
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub algorithm: Algorithm,
    pub alpha: f64,
    #[serde(default = "one")]
    pub batch_size: usize,
    /// Exactly one of `steps` and `epochs`; an epoch is `ceil(n_train / batch_size)` steps.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub lr_ell: Option<f64>,
    #[serde(default)]
    pub projection_radius: Option<f64>,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default = "default_tau")]
    pub soft_tau: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub iterate_selection: IterateSelection,
    #[serde(default)]
    pub order: StepOrder,
    #[serde(default)]
    pub instrument_full_losses: bool,
    /// Risk level used in reported metrics; defaults to `alpha`.
    #[serde(default)]
    pub eval_alpha: Option<f64>,
    #[serde(default)]
    pub lr_decay: Option<LrDecay>,
    #[serde(default)]
    pub early_stopping: bool,
}

fn one() -> usize {
    1
}
fn default_lr() -> f64 {
    0.01
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::PlainSgd
}
fn default_tau() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetConfig, algorithm: Algorithm, alpha: f64, seed: u64) -> Self {
        Self {
            dataset,
            algorithm,
            alpha,
            batch_size: 1,
            steps: None,
            epochs: Some(1),
            lr: default_lr(),
            optimizer: default_optimizer(),
            lr_ell: None,
            projection_radius: None,
            sampler: SamplerSettings::default(),
            soft_tau: default_tau(),
            seed,
            output_dir: None,
            iterate_selection: IterateSelection::default(),
            order: StepOrder::default(),
            instrument_full_losses: false,
            eval_alpha: None,
            lr_decay: None,
            early_stopping: false,
        }
    }

    pub fn eval_alpha(&self) -> f64 {
        self.eval_alpha.unwrap_or(self.alpha)
    }

    /// Checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if let Some(a) = self.eval_alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Config(format!("eval_alpha {a} outside (0, 1]")));
            }
        }
        match (self.steps, self.epochs) {
            (Some(_), Some(_)) => Err(Error::Config("give either `steps` or `epochs`, not both".into())),
            (None, None) => Err(Error::Config("one of `steps` or `epochs` is required".into())),
            _ => self.train_config(1).validate(),
        }
    }

    pub fn steps_per_epoch(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.batch_size.max(1)).max(1)
    }

    /// Training configuration for a training split of `n_train` examples.
    pub fn train_config(&self, n_train: usize) -> TrainConfig {
        let per_epoch = self.steps_per_epoch(n_train);
        let steps = self.steps.unwrap_or_else(|| self.epochs.unwrap_or(0) * per_epoch);
        let mut c = TrainConfig::new(self.algorithm, self.alpha, steps, self.seed);
        c.batch_size = self.batch_size;
        c.optimizer = OptimizerConfig {
            kind: self.optimizer,
            lr: self.lr,
            projection_radius: self.projection_radius,
        };
        c.lr_ell = self.lr_ell;
        c.sampler = self.sampler.to_config();
        c.soft_tau = self.soft_tau;
        c.iterate_selection = self.iterate_selection;
        c.order = self.order;
        c.instrument_full_losses = self.instrument_full_losses;
        c.epoch_length = Some(per_epoch);
        c.lr_decay = self.lr_decay.clone();
        c.early_stopping = self.early_stopping;
        c
    }
}

/// Metrics of one parameter vector on the three splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub train: EvalMetrics,
    pub val: EvalMetrics,
    pub test: EvalMetrics,
}

pub fn evaluate_splits(params: &ModelParams, prepared: &Prepared, alpha: f64) -> Result<SplitMetrics> {
    Ok(SplitMetrics {
        train: evaluate(params, &prepared.train, &prepared.loss, alpha)?,
        val: evaluate(params, &prepared.val, &prepared.loss, alpha)?,
        test: evaluate(params, &prepared.test, &prepared.loss, alpha)?,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub prepared: Prepared,
    pub output: TrainOutput,
    /// Metrics of the zero initialization.
    pub initial: SplitMetrics,
    pub final_metrics: SplitMetrics,
}

/// Runs a configuration on already-loaded raw data.
pub fn run_on(config: &ExperimentConfig, raw: &Dataset) -> Result<ExperimentResult> {
    config.validate()?;
    let prepared = prepare(&config.dataset, raw, config.seed)?;
    let tc = config.train_config(prepared.train.len());
    let alpha = config.eval_alpha();
    let initial = evaluate_splits(&ModelParams::zeros(prepared.train.dim()), &prepared, alpha)?;
    let output = train(&prepared.train, Some(&prepared.val), &prepared.loss, &tc)?;
    let final_metrics = evaluate_splits(&output.params, &prepared, alpha)?;
    Ok(ExperimentResult {
        prepared,
        output,
        initial,
        final_metrics,
    })
}

/// Loads the dataset (relative paths against `base`) and runs.
pub fn run_experiment(config: &ExperimentConfig, base: &Path) -> Result<ExperimentResult> {
    config.validate()?;
    let raw = config.dataset.load(base, config.seed)?;
    run_on(config, &raw)
}
