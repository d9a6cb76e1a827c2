use thiserror::Error;

use adacvar_core::Error as CoreError;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure at step {step}: {message}")]
    Numeric { step: usize, message: String },
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }

    /// Treats any failure as a configuration problem except numeric ones.
    pub fn config(e: CoreError) -> Self {
        match e {
            CoreError::Numeric { step } => CliError::Numeric {
                step,
                message: e.to_string(),
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(m) => CliError::Config(m),
            CoreError::Numeric { step } => CliError::Numeric {
                step,
                message: e.to_string(),
            },
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
