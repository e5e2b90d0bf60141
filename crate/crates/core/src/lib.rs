//! Prediction-correction solvers for time-varying convex programs.
//!
//! Discrete-time solvers sample `f(x; t)` every `h` seconds and alternate a
//! prediction of the next optimizer with corrector passes on the newly
//! revealed cost. Continuous-time flows track the optimizer trajectory
//! directly, with a barrier variant for inequality constraints.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod continuous;
pub mod correctors;
pub mod discrete;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod predictors;
pub mod problem;

#[cfg(test)]
pub(crate) mod testing;

pub use continuous::{
    barrier_flow, barrier_oracle, initial_slack, integrate_flow, optimal_flow_rhs,
    BarrierSchedules, ConstrainedProblem, Constraint, FlowConfig, FlowTrajectory, Integrator,
    LinearConstraint,
};
pub use correctors::{contraction_factor, CorrectorKind, CorrectorVariant};
pub use discrete::{
    reference_trajectory, run_prediction_correction, run_unstructured, PredictorKind, SolverConfig,
    StepRecord, TrajectoryRecord,
};
pub use error::{Result, TvError};
pub use metrics::{
    compute_ate, compute_sg, compute_tr, estimate_cr, loglog_slope, path_length, MetricsReport,
};
pub use predictors::{HintStream, KalmanModel};
pub use problem::{
    BoxSet, ConstraintSet, ConvexityProfile, Matrix, Polytope, Regularizer, TimeGrid,
    TimeVaryingProblem, Vector,
};
