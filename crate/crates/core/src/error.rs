use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GapError>;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by [`ErrorClass`] so front ends can map them to exit
/// codes without matching every case.
#[derive(Debug, Error)]
pub enum GapError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("parameter `{0}` was not recorded on the tape")]
    UnrecordedParameter(String),

    #[error("backward requires a scalar output, got {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("feature mismatch: {message}")]
    FeatureMismatch {
        message: String,
        missing: Vec<String>,
    },

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("external partitioner failed: {0}")]
    External(String),
}

/// Coarse error category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
    Io,
}

impl GapError {
    pub fn class(&self) -> ErrorClass {
        match self {
            GapError::NonFinite(_)
            | GapError::NonFiniteGradient(_)
            | GapError::NoConvergence { .. }
            | GapError::Diverged { .. } => ErrorClass::Numeric,
            GapError::Io { .. } | GapError::Checkpoint(_) | GapError::External(_) => {
                ErrorClass::Io
            }
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GapError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        GapError::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}

impl From<serde_json::Error> for GapError {
    fn from(e: serde_json::Error) -> Self {
        GapError::Serde(e.to_string())
    }
}
