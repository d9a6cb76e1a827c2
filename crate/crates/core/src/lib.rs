pub mod algorithms;
pub mod data;
pub mod error;
pub mod experiment;
pub mod kdpp;
pub mod learners;
pub mod metrics;
pub mod risk;
pub mod rng;
pub mod sampler;
pub mod sim;

pub use algorithms::{Algorithm, IterateSelection, StepOrder, TrainConfig, TrainOutput};
pub use data::{Dataset, Schema, Standardizer, SyntheticKind, Task};
pub use error::{Error, Result};
pub use experiment::{DatasetConfig, ExperimentConfig};
pub use learners::{LossKind, LossSpec, ModelParams};
pub use metrics::EvalMetrics;
pub use risk::RiskLevel;
pub use sampler::SamplerConfig;
