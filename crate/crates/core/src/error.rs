use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point ({x}, {y}) lies outside the grid domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("value-policy iteration did not converge after {outer} outer iterations (last change {last_change:.3e})")]
    NonConvergence {
        outer: usize,
        last_change: f64,
        change_history: Vec<f64>,
    },

    #[error("policy evaluation failed: {0}")]
    LinearSolve(String),

    #[error("trajectory aborted after {steps} steps: {reason}")]
    TraceAborted {
        reason: String,
        steps: usize,
        partial: Vec<[f64; 2]>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
