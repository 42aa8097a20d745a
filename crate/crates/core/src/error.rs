use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySamples,

    #[error("non-finite outcome at sample index {index}: {value}")]
    NonFiniteOutcome { index: usize, value: f64 },

    #[error("invalid structural causal model:\n  - {}", .0.join("\n  - "))]
    InvalidScm(Vec<String>),

    #[error("covariate value {0} is not in the model's support")]
    UnknownCovariate(u64),

    #[error("model has no separable parts to check")]
    MissingSeparableParts,

    #[error("invalid network layout: {0}")]
    InvalidLayout(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in layer {layer} during {stage}")]
    NonFinite { layer: usize, stage: &'static str },

    #[error("cannot step a terminal environment state")]
    TerminalState,

    #[error("invalid action {0}")]
    InvalidAction(usize),

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(f64),

    #[error("episode {episode}, step {step}: {source}")]
    Training {
        episode: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("corrupt checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad user input rather than the run itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::InvalidScm(_) | Error::InvalidLayout(_)
        )
    }
}
