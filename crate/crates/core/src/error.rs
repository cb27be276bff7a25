use thiserror::Error;

use crate::hyperplane::VariogramViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping of errors, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or parameters supplied by the caller.
    Input,
    /// The data does not support the requested analysis.
    Data,
    /// A numerical procedure failed or lost accuracy.
    Numeric,
    /// Reading or writing files failed.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid variogram: {0}")]
    InvalidVariogram(VariogramViolation),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "rejection sampler too inefficient: acceptance rate {rate:.3e} after {attempts} attempts \
         (floor {floor:.1e}); use the tilting sampler instead"
    )]
    Inefficient { rate: f64, attempts: u64, floor: f64 },

    #[error("degenerate law: {0}")]
    DegenerateLaw(String),

    #[error("grid resolution too coarse: monotone cleanup of size {cleanup:.3e} exceeds {limit:.1e}; refine the grid")]
    GridResolution { cleanup: f64, limit: f64 },

    #[error("too few exceedances: {count} found, at least {required} required")]
    TooFewExceedances { count: usize, required: usize },

    #[error("column {column} is constant; cannot standardize a degenerate margin")]
    DegenerateMargin { column: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidVariogram(_)
            | Error::InvalidParameter(_)
            | Error::Json(_) => ErrorKind::Input,
            Error::TooFewExceedances { .. } | Error::DegenerateMargin { .. } | Error::Csv(_) => {
                ErrorKind::Data
            }
            Error::Inefficient { .. }
            | Error::DegenerateLaw(_)
            | Error::GridResolution { .. }
            | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Io(_) => ErrorKind::Io,
        }
    }
}
