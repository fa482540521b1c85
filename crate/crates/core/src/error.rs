use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the shell solver and its experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point ({0}, {1}) lies outside the closed parameter disk of radius {2}")]
    OutsideDomain(f64, f64, f64),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("linear solve broke down (matrix not numerically positive definite): {0}")]
    LinearBreakdown(String),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("solve failed at kappa = {kappa:.6e}: {source}")]
    AtKappa {
        kappa: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
