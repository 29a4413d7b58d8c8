use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("cannot step from terminal state {0}")]
    TerminalState(usize),

    #[error("value iteration did not converge in {iters} sweeps (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("ill-conditioned system (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

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

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn index(what: &'static str, index: usize, size: usize) -> Self {
        Error::IndexOutOfRange { what, index, size }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
