use std::path::PathBuf;

use crate::spectral::SpectralFactors;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample set is empty")]
    EmptySamples,

    #[error("dense third-order tensor refused for d = {dim} (limit {limit})")]
    DenseGuard { dim: usize, limit: usize },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("second moment has {usable} usable eigenvalues, {requested} requested")]
    RankDeficient { requested: usize, usable: usize },

    #[error("power method produced non-positive eigenvalue at component {index}")]
    DegenerateDecomposition {
        index: usize,
        partial: Box<SpectralFactors>,
    },

    #[error("recovered topic {topic} has no positive mass after clamping")]
    DegenerateRecovery { topic: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus {path}: {reason}")]
    Corpus { path: PathBuf, reason: String },

    #[error("config line {line}: `{field}`: {reason}")]
    Config { line: usize, field: String, reason: String },
}

impl Error {
    /// Process exit status: 1 for configuration or input errors, 2 for I/O
    /// and corpus errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Corpus { .. } => 2,
            Error::NoConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::DegenerateDecomposition { .. }
            | Error::DegenerateRecovery { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
