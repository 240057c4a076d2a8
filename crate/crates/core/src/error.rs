use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("join error: {0}")]
    Join(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("location {index} at ({x}, {y}) is outside the mesh")]
    Containment { index: usize, x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("prior calibration failed: {0}")]
    Calibration(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("simulation error: {0}")]
    Generation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Format {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
