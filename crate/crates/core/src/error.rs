use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a precondition. `key` names the offending field.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Shapes or block layouts that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("potential domain error: F(u) + B = {radicand:e} <= 0 at u = {u}, B = {b}")]
    Domain { u: f64, b: f64, radicand: f64 },

    #[error("singular factorization (pivot row {pivot_row})")]
    Singular { pivot_row: usize },

    #[error("{solver} did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solve residual check failed: relative residual {residual:e} > {tolerance:e}")]
    ResidualCheck { residual: f64, tolerance: f64 },

    #[error("identity check failed at step {step}: {message}")]
    Identity { step: usize, message: String },

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("step {step} (t = {time}): {source}")]
    AtStep {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse { .. } | Error::Io { .. } => 2,
            Error::Identity { .. } => 4,
            Error::AtStep { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
