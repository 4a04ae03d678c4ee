use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A weighted estimating equation had an effectively zero slope.
    /// Bootstrap draws hitting this are rejected and redrawn.
    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("solver did not converge after {iterations} iterations (|m_bar| = {m_bar:e})")]
    Convergence { iterations: usize, m_bar: f64 },

    #[error("positivity violated: {0}")]
    PositivityViolation(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("replicate {replicate} failed: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code category for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Io { .. } | Error::Parse(_) => 3,
            Error::Degenerate(_)
            | Error::Convergence { .. }
            | Error::PositivityViolation(_)
            | Error::Internal(_) => 4,
            Error::Replicate { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
