use std::path::PathBuf;

use thiserror::Error;

use crate::psd::PsdReport;

#[derive(Debug, Error)]
pub enum FchError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} cells per side vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("unsupported norm exponent p = {0} (expected 1, 2, 4, 6 or inf)")]
    UnsupportedNorm(f64),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("mobility must be strictly positive, found {value} at cell ({i}, {j})")]
    NonPositiveMobility { i: usize, j: usize, value: f64 },

    #[error("mean mismatch: {what} (|difference| = {diff:e}, allowed {allowed:e})")]
    MeanMismatch {
        what: &'static str,
        diff: f64,
        allowed: f64,
    },

    #[error("preconditioner symbol not positive: {0}")]
    IndefinitePreconditioner(String),

    #[error("line search failed to bracket a root after {expansions} expansions (last alpha = {alpha:e})")]
    LineSearchBracket { expansions: usize, alpha: f64 },

    #[error("PSD solver did not converge in {} iterations (final residual {:e})", .report.iters, .report.final_residual())]
    NotConverged { report: Box<PsdReport> },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<FchError>,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed field file: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, FchError>;

impl FchError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FchError::Io {
            path: path.into(),
            source,
        }
    }
}
