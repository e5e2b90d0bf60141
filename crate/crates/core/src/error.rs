use thiserror::Error;

use crate::discrete::TrajectoryRecord;

/// Errors raised by oracles, solvers and benchmark builders.
#[derive(Debug, Error)]
pub enum TvError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("constraint set is infeasible (max violation {violation:.3e})")]
    Infeasible { violation: f64 },

    #[error("projection did not converge after {iterations} sweeps (residual {residual:.3e})")]
    ProjectionNotConverged { iterations: usize, residual: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("insufficient history: t - h = {requested} precedes grid origin {origin}")]
    InsufficientHistory { requested: f64, origin: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("ill-conditioned system (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("singular innovation covariance")]
    SingularInnovation,

    #[error("hint stream exhausted at step {0}")]
    HintsExhausted(usize),

    #[error("point outside barrier domain at t = {t} (margin {margin:.3e})")]
    Domain { t: f64, margin: f64 },

    #[error("iteration cap {0} exceeded")]
    IterationCap(usize),

    #[error("reference solution unavailable")]
    MissingReference,

    #[error("solver diverged at step {step}")]
    Diverged {
        step: usize,
        partial: Box<TrajectoryRecord>,
    },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailed { t: f64, reason: String },

    #[error("robot is in collision with obstacle {obstacle} at t = {t}")]
    Collision { obstacle: usize, t: f64 },

    #[error("invalid metric input: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, TvError>;
