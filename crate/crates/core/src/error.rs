use thiserror::Error;

use crate::graph::VertexId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no path from vertex {from} to vertex {to}")]
    Unreachable { from: VertexId, to: VertexId },

    #[error("integrity failure: {0}")]
    Integrity(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("budget exceeded: instance needs {required}, budget allows {budget}")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("fractional solver did not converge within {0} steps")]
    IterationCap(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }
}
