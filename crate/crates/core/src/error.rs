use thiserror::Error;

/// Errors raised by the simulation and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate bin {bin}: zero population with nonzero contacts")]
    DegenerateBin { bin: usize },

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("undefined index: {0}")]
    UndefinedIndex(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("parameters out of bounds: {0}")]
    OutOfBounds(String),

    #[error("objective failed at {params:?}: {source}")]
    Objective {
        params: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
