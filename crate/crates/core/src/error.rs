use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported derivative order {0} (expected 1, 2 or 3)")]
    UnsupportedOrder(u32),

    #[error("field length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("position {x} lies outside the tank [-{half_length}, {half_length}]")]
    OutsideTank { x: f64, half_length: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("water height {height:e} at x = {x} (t = {t}) is not positive: dry or breaking state")]
    DryState { x: f64, t: f64, height: f64 },

    #[error("elliptic solve did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("step {step} (t = {t}) failed: {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("ensemble statistics need at least 2 paths, got {0}")]
    TooFewPaths(usize),

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output directory {0} already exists (use --force to overwrite)")]
    OutputExists(PathBuf),
}

impl Error {
    /// True for errors caused by the numerics rather than by user input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DryState { .. } | Error::SolverFailure { .. } | Error::NonFinite(_) => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
