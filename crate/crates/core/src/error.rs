use thiserror::Error;

/// Errors produced by the model, filters, solver and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A model matrix or parameter failed validation. `path` names the
    /// offending field, e.g. `model.B[2]`.
    #[error("{path}: {reason}")]
    InvalidModel { path: String, reason: String },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("risk-aversion factor must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("cost distribution has no atoms")]
    EmptyDistribution,

    #[error("invalid cost distribution: {0}")]
    InvalidDistribution(String),

    #[error("{kind} index {index} out of range (size {size})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    /// The observation has zero probability under the predicted belief.
    #[error("observation {observation} is impossible under the prior belief")]
    ImpossibleObservation { observation: usize },

    /// The action has zero probability (sigma = 0) under the current belief.
    #[error("action {action} has zero probability under the current belief")]
    ImpossibleAction { action: u8 },

    #[error("change time is not almost surely finite: {0}")]
    NonAbsorbing(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    /// Value iteration hit `max_iter`; the partial policy is still flagged
    /// on [`SolvedPolicy`](crate::SolvedPolicy).
    #[error("value iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("policy does not match model: {0}")]
    PolicyMismatch(String),

    #[error("replay step {step}: action {action} has zero probability under the public belief")]
    Replay { step: usize, action: u8 },

    /// Configuration or input document error, with the path of the key.
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn model(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidModel {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed user input (as opposed to
    /// runtime failures such as I/O or an impossible replay).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel { .. }
                | Error::InvalidBelief(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidAlpha(_)
                | Error::EmptyDistribution
                | Error::InvalidDistribution(_)
                | Error::IndexOutOfRange { .. }
                | Error::InvalidSolverConfig(_)
                | Error::Config { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
