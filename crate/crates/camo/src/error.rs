//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CamoError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("zero-norm vector")]
    DegenerateVector,

    #[error("degenerate mean direction: resultant length is zero")]
    DegenerateMean,

    #[error("degenerate directory: filename vectors cancel out")]
    DegenerateDirectory,

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("duplicate entry: {0}")]
    Duplicate(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CamoError>;
