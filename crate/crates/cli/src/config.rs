//! Loading experiment configurations and layering overrides on top.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use adacvar_core::ExperimentConfig;

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "ADACVAR_SEED";

/// Parses a configuration, reporting the offending field path on failure.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    config.validate().map_err(CliError::config)?;
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Applies, in increasing precedence, the environment seed and the flags.
pub fn apply_overrides(config: &mut ExperimentConfig, env_seed: Option<&str>, flags: &Overrides) -> CliResult<()> {
    if let Some(v) = env_seed {
        config.seed = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
    }
    if let Some(s) = flags.seed {
        config.seed = s;
    }
    if let Some(d) = &flags.output_dir {
        config.output_dir = Some(d.clone());
    }
    Ok(())
}

/// Hex SHA-256 of the canonical configuration with seed and output directory
/// blanked, so runs that differ only by seed share a hash.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.seed = 0;
    c.output_dir = None;
    let text = serde_json::to_string(&c).expect("configuration serializes");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}
