use std::time::Duration;

use thiserror::Error;

use crate::convergence::ConvergenceReport;
use crate::trace::TraceLog;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: expected {expected}, got {found}")]
    QubitMismatch { expected: usize, found: usize },

    #[error("invalid Pauli label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: String },

    /// An internal consistency check failed. Seeing this means a bug.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("row cap of {cap} Pauli terms exceeded at gate {gate}")]
    RowCapExceeded {
        cap: usize,
        gate: usize,
        partial: Box<TraceLog>,
    },

    #[error("Pauli sum capacity of {cap} rows exceeded")]
    CapacityExceeded { cap: usize },

    #[error("wall-clock budget of {budget:?} exhausted at gate {gate}")]
    BudgetExceeded {
        budget: Duration,
        gate: usize,
        partial: Box<TraceLog>,
    },

    #[error("convergence protocol aborted after {} step(s): {cause}", partial.steps.len())]
    ProtocolAborted {
        cause: Box<Error>,
        partial: Box<ConvergenceReport>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("singular formula: {0}")]
    Singularity(String),

    #[error("quadrature did not converge: estimated error {achieved:e} above tolerance {requested:e}")]
    QuadratureFailed { achieved: f64, requested: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Partial trace carried by a resource or budget abort.
    pub fn partial_trace(&self) -> Option<&TraceLog> {
        match self {
            Error::RowCapExceeded { partial, .. } | Error::BudgetExceeded { partial, .. } => {
                Some(partial)
            }
            Error::ProtocolAborted { cause, .. } => cause.partial_trace(),
            _ => None,
        }
    }
}

pub(crate) fn ensure_qubits(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::QubitMismatch { expected, found })
    }
}
