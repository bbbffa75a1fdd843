use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain (e.g. `alpha <= 0`).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Structurally invalid input (mismatched lengths, out-of-range checkpoints, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A numerical operation failed (overflow, non-SPD matrix, broken statistics).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A data file could not be parsed; `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
