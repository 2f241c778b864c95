//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::types::CandidateInvalid;

/// Result alias using the crate error.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A candidate failed one or more type invariants.
    #[error(transparent)]
    InvalidCandidate(#[from] CandidateInvalid),

    /// The constrained search space admits fewer distinct candidates than requested.
    #[error(
        "search space exhausted: heuristic admits at most {admissible} distinct candidates, \
         {requested} requested"
    )]
    ExhaustedSpace { admissible: usize, requested: usize },

    /// Not enough history records to perform the operation.
    #[error("insufficient history: {actual} records available, {required} required")]
    InsufficientHistory { required: usize, actual: usize },

    /// No unevaluated candidates remain; the engine should regenerate or switch heuristic.
    #[error("no unevaluated candidates remain in the search space")]
    EmptySpace,

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// A required file does not exist.
    #[error("file not found: {0}")]
    NotFound(PathBuf),

    /// A history or checkpoint line failed to parse.
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    /// Bad command-line usage; maps to exit code 2.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
