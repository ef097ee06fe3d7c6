//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The variants distinguish bad inputs (caller mistakes), numerical failures
/// (tolerances exceeded, divergence), and I/O problems, because the CLI maps
/// them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or malformed input data.
    #[error("input error: {0}")]
    Input(String),

    /// A quantity left its mathematically valid domain (negative variance,
    /// non-finite argument, vacuous bound, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical tolerance was violated (PSD repair failed, eigensolver
    /// fed an asymmetric matrix, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// SGD diverged; carries the iteration index at which the guard fired.
    #[error("divergence at iteration {iteration}: {message}")]
    Divergence { iteration: usize, message: String },

    /// File-format or I/O failure.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
