use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, the analysis routines and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("integration diverged at iteration {iteration}, node ({x}, {y}): value {value}")]
    Divergence {
        iteration: u64,
        x: usize,
        y: usize,
        value: f64,
    },

    #[error("{what} lies entirely outside the simulated domain")]
    OutsideDomain { what: String },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("target ratio {target} unreachable: achievable range is [{min}, {max}]")]
    Unreachable { target: f64, min: f64, max: f64 },

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config key `{key}`: {reason}")]
    ConfigInvalid { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
