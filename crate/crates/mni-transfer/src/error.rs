//! Crate-wide error type.
//!
//! Variants are grouped by how they are surfaced at the CLI boundary:
//! [`Error::Config`] maps to exit code 2, IO errors to exit code 4, and every
//! numerical failure (invalid input, shape mismatch, inconsistent system, ...)
//! to exit code 3.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A matrix or vector input contains NaN or infinite entries.
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    /// Dimensions of the inputs do not line up, or a fit was requested in an
    /// unsupported regime (e.g. more rows than columns for an interpolator).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A spectrum is empty, non-positive, or not nonincreasing.
    #[error("invalid spectrum: {0}")]
    Spectrum(String),

    /// A stacked interpolation system admits no solution within tolerance.
    #[error("inconsistent system: {0}")]
    InconsistentSystem(String),

    /// Fold count does not divide the number of target rows.
    #[error("{rows} rows cannot be split into {folds} equal folds")]
    Divisibility { rows: usize, folds: usize },

    /// A scalar argument lies outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// Experiment configuration is invalid; the message names the field.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
