use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("unknown {kind} '{id}'")]
    NotFound { kind: &'static str, id: String },

    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invariant violation at {path}: {message}")]
    Invariant { path: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid",
            Error::OutOfRange { .. } => "out_of_range",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::DegenerateTrajectory(_) => "degenerate_trajectory",
            Error::Insufficient(_) => "insufficient_data",
            Error::NotFound { .. } => "not_found",
            Error::Malformed { .. } => "malformed_json",
            Error::Schema { .. } => "schema_violation",
            Error::Invariant { .. } => "invariant_violation",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
