use scslab_analysis::AnalysisError;
use scslab_train::TrainError;
use thiserror::Error;

/// Command failures, each mapped to a documented process exit code:
/// 2 config, 3 data, 4 checkpoint, 5 numeric.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Checkpoint(String),

    #[error("{0}")]
    Numeric(String),

    /// A `--jobs` worker process failed; carries its exit code through.
    #[error("grid cell {cell} failed with exit code {code}")]
    Worker { cell: usize, code: i32 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Checkpoint(_) => 4,
            CliError::Numeric(_) => 5,
            CliError::Worker { code, .. } => *code,
        }
    }

    /// Wraps an output-file io failure as a config-level error.
    pub fn io(path: &std::path::Path, e: std::io::Error) -> CliError {
        CliError::Config(format!("io error on {}: {e}", path.display()))
    }
}

/// Training failures keep their category: non-finite values exit 5,
/// checkpoint problems 4, data problems 3, the rest 2.
pub fn from_train(e: TrainError) -> CliError {
    match e {
        TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
        TrainError::Checkpoint { .. } => CliError::Checkpoint(e.to_string()),
        TrainError::Data(_) => CliError::Data(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

/// Analysis failures: non-finite values exit 5, the rest 2.
pub fn from_analysis(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::NonFinite { .. } => CliError::Numeric(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
