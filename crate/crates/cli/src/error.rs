use std::path::PathBuf;

use pauliprop::Error as CoreError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// I/O and other failures not covered below.
    pub const FAILURE: i32 = 1;
    /// Bad flags, config or input files.
    pub const USAGE: i32 = 2;
    /// Row cap or capacity exceeded.
    pub const RESOURCE: i32 = 3;
    /// Wall-clock budget exhausted.
    pub const BUDGET: i32 = 4;
    /// Quadrature, singular fits, too little data, internal checks.
    pub const NUMERICAL: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("config file {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Usage(_) | CliError::Config { .. } => exit::USAGE,
            CliError::Io { .. } | CliError::Json(_) => exit::FAILURE,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::RowCapExceeded { .. } | CoreError::CapacityExceeded { .. } => exit::RESOURCE,
        CoreError::BudgetExceeded { .. } => exit::BUDGET,
        CoreError::ProtocolAborted { cause, .. } => core_exit_code(cause),
        CoreError::QubitMismatch { .. }
        | CoreError::InvalidLabel { .. }
        | CoreError::InvalidArgument(_)
        | CoreError::InvalidTopology(_)
        | CoreError::Parse(_) => exit::USAGE,
        CoreError::InvariantViolation(_)
        | CoreError::InsufficientData(_)
        | CoreError::Singularity(_)
        | CoreError::QuadratureFailed { .. } => exit::NUMERICAL,
        CoreError::Io(_) | CoreError::Json(_) => exit::FAILURE,
    }
}
