//! Harness error type with the process exit-code mapping.

use std::path::PathBuf;

/// Errors surfaced by the harness; each class maps to a CLI exit code.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// Invalid configuration, spec file or argument (exit code 1).
    #[error("configuration error: {0}")]
    Config(String),
    /// Structural solver failure (exit code 2).
    #[error("solver error: {0}")]
    Solver(#[from] rsma_core::Error),
    /// File I/O failure with path context (exit code 3).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> SimError {
        SimError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> SimError {
        SimError::Io { path: path.into(), source }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 1,
            SimError::Solver(_) => 2,
            SimError::Io { .. } => 3,
        }
    }
}
