use std::path::PathBuf;

use thiserror::Error;

use crate::types::PrimalSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input at {0}")]
    NonFiniteInput(String),

    #[error("invalid group layout: {0}")]
    InvalidGroupLayout(String),

    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("response is orthogonal to every feature (lambda_max = 0)")]
    DegenerateResponse,

    #[error("v1 has zero norm; the ray direction is undefined")]
    DegenerateV1,

    #[error("solver hit max_iters={iters} with duality gap {gap:e} (target {target:e})")]
    MaxItersExceeded {
        iters: usize,
        gap: f64,
        target: f64,
        best: Box<PrimalSolution>,
    },

    #[error("Dykstra projection did not converge after {cycles} cycles (last increment {increment:e})")]
    NoConvergence { cycles: usize, increment: f64 },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("bad magic bytes; not a DPPS file")]
    BadMagic,

    #[error("unsupported DPPS version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },

    #[error("path step {index} (lambda = {lambda:e}) failed: {source}")]
    PathStep {
        index: usize,
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input or IO.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::MaxItersExceeded { .. }
            | Error::NoConvergence { .. }
            | Error::DegenerateV1
            | Error::DegenerateResponse => true,
            Error::PathStep { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => true,
            Error::PathStep { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
