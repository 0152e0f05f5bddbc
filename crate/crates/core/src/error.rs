use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside [{min}, {max}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("column mapping undefined at |y| = {y} (radius {radius})")]
    SingularColumn { y: f64, radius: f64 },

    #[error("tensor requested inside the rim band: |y'| = {y} >= {limit}")]
    EdgeSingularity { y: f64, limit: f64 },

    #[error("invalid lens spec: {0}")]
    InvalidSpec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver unstable: non-finite field at timestep {step}")]
    Instability { step: u64 },

    #[error("solver did not converge: relative change {metric:.3e} after {periods} periods")]
    NotConverged { periods: usize, metric: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate pattern: {0}")]
    DegeneratePattern(String),

    #[error("slab is opaque: |S21| = {0:e}")]
    OpaqueSlab(f64),

    #[error("cannot resolve retrieval branch, candidates {candidates:?}")]
    BranchAmbiguity { candidates: Vec<i32> },

    #[error("sweep undersampled between {f_lo} GHz and {f_hi} GHz: phase step {step:.3} rad exceeds pi")]
    UndersampledSweep { f_lo: f64, f_hi: f64, step: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stage { source, .. } => source.kind(),
            Error::Instability { .. }
            | Error::NotConverged { .. }
            | Error::DegeneratePattern(_)
            | Error::OpaqueSlab(_)
            | Error::BranchAmbiguity { .. }
            | Error::UndersampledSweep { .. } => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    /// Prefix the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
