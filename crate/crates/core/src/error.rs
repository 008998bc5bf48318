use crate::spectral::Mode3;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Statistics carried out of a failed integration so callers can report
/// how far the run got.
#[derive(Clone, Debug, PartialEq)]
pub struct FailedRun {
    pub t: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub last_state: crate::spectral::SpectralField2,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid with {n} points per axis aliases order {order} fields (need at least {required})")]
    Aliasing {
        n: usize,
        order: usize,
        required: usize,
    },
    #[error("field holds a non-finite coefficient at index {index}")]
    InvalidField { index: usize },
    #[error("sampler returned a non-finite value at {point:?}")]
    InvalidSample { point: Vec<f64> },
    #[error("truncation orders differ: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("grid shapes differ: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("field does not evaluate to real values: imaginary residue {residue:e} exceeds {tolerance:e}")]
    NotReal { residue: f64, tolerance: f64 },
    #[error("system is singular to working precision at pivot {pivot} (mode {mode})")]
    Singular { pivot: usize, mode: Mode3 },
    #[error("linear algebra backend failed: {0}")]
    Backend(String),
    #[error("integration stopped at t={} after {} accepted / {} rejected steps: {reason}", .run.t, .run.accepted, .run.rejected)]
    IntegrationFailure { reason: String, run: Box<FailedRun> },
    #[error("integration diverged (non-finite state) at t={t}")]
    Divergence { t: f64 },
    #[error("periodic march did not contract after {periods} periods (last defect {defect:e})")]
    NonConvergence { periods: usize, defect: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
