//! Discrete-time solver loops: running (correction-only) methods and
//! prediction-correction methods.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::correctors::{CorrectorKind, CorrectorVariant};
use crate::error::{Result, TvError};
use crate::linalg::is_finite;
use crate::predictors::{
    build_taylor_model, predict_by_parameter, predict_composite, predict_unconstrained, HintStream,
    KalmanModel,
};
use crate::problem::{TimeGrid, TimeVaryingProblem, Vector};

/// Abort threshold on the tracking error (or on the iterate norm when no
/// reference is known).
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Iteration cap per sample when solving frozen problems for ground truth.
pub const REFERENCE_ITERATION_CAP: usize = 1_000_000;

/// How `x_{k+1|k}` is formed from information up to `t_k`.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum PredictorKind {
    None,
    /// First-order Taylor model of the optimality condition. With
    /// `exact_solve` the model root comes from a linear solve instead of
    /// proximal-gradient passes (unregularized problems only).
    Taylor {
        exact_solve: bool,
    },
    /// Kalman forecast of the cost parameter; the observation matrix maps the
    /// filter state to the parameter.
    Kalman(KalmanModel),
    Hint(HintStream),
    /// Shifts the iterate by the true optimizer increment. Looks ahead.
    Clairvoyant,
}

impl PredictorKind {
    pub fn is_none(&self) -> bool {
        matches!(self, PredictorKind::None)
    }

    pub fn label(&self) -> &'static str {
        match self {
            PredictorKind::None => "none",
            PredictorKind::Taylor { .. } => "taylor",
            PredictorKind::Kalman(_) => "kalman",
            PredictorKind::Hint(_) => "hint",
            PredictorKind::Clairvoyant => "clairvoyant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub prediction_steps: usize,
    pub correction_steps: usize,
    pub predictor: PredictorKind,
    pub corrector: CorrectorVariant,
    pub grid: TimeGrid,
    /// Initial decision; zero when absent.
    pub x0: Option<Vector>,
}

impl SolverConfig {
    pub fn unstructured(grid: TimeGrid, alpha: f64, correction_steps: usize) -> Self {
        Self {
            alpha,
            prediction_steps: 0,
            correction_steps,
            predictor: PredictorKind::None,
            corrector: CorrectorVariant::ProximalGradient,
            grid,
            x0: None,
        }
    }

    pub fn prediction_correction(
        grid: TimeGrid,
        alpha: f64,
        predictor: PredictorKind,
        prediction_steps: usize,
        correction_steps: usize,
    ) -> Self {
        Self {
            alpha,
            prediction_steps,
            correction_steps,
            predictor,
            corrector: CorrectorVariant::ProximalGradient,
            grid,
            x0: None,
        }
    }

    pub fn with_x0(mut self, x0: Vector) -> Self {
        self.x0 = Some(x0);
        self
    }

    /// Gradient-type passes spent per step; an exact model solve counts as one.
    pub fn passes_per_step(&self) -> usize {
        let prediction = match self.predictor {
            PredictorKind::None => 0,
            PredictorKind::Taylor { exact_solve: true } => 1,
            _ => self.prediction_steps,
        };
        prediction + self.correction_steps
    }

    pub fn validate<P: TimeVaryingProblem + ?Sized>(&self, oracle: &P) -> Result<()> {
        let profile = oracle.profile();
        if !(self.alpha > 0.0) || (profile.l.is_finite() && self.alpha >= 2.0 / profile.l) {
            return Err(TvError::InvalidConfig(format!(
                "step size {} outside (0, 2/L) with L = {}",
                self.alpha, profile.l
            )));
        }
        if self.correction_steps < 1 {
            return Err(TvError::InvalidConfig(
                "at least one correction step is required".into(),
            ));
        }
        if self.predictor.is_none() != (self.prediction_steps == 0) {
            return Err(TvError::InvalidConfig(
                "prediction steps must be zero exactly when there is no predictor".into(),
            ));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != oracle.dim() {
                return Err(TvError::DimensionMismatch {
                    expected: oracle.dim(),
                    got: x0.len(),
                });
            }
        }
        if let PredictorKind::Kalman(km) = &self.predictor {
            let param = oracle.parametric().ok_or_else(|| {
                TvError::InvalidConfig("Kalman predictor needs a parametric oracle".into())
            })?;
            if km.observation.nrows() != param.param_dim() {
                return Err(TvError::DimensionMismatch {
                    expected: param.param_dim(),
                    got: km.observation.nrows(),
                });
            }
        }
        Ok(())
    }
}

/// One sample of a solver trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub reference: Option<Vec<f64>>,
    pub error: Option<f64>,
    /// Monotonic wall time spent producing this iterate.
    pub wall_ns: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub steps: Vec<StepRecord>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Tracking errors, or `None` if any sample lacks a reference.
    pub fn errors(&self) -> Option<Vec<f64>> {
        self.steps.iter().map(|s| s.error).collect()
    }

    pub fn has_reference(&self) -> bool {
        !self.steps.is_empty() && self.steps.iter().all(|s| s.reference.is_some())
    }

    pub fn references(&self) -> Option<Vec<Vector>> {
        self.steps
            .iter()
            .map(|s| s.reference.as_ref().map(|r| Vector::from_row_slice(r)))
            .collect()
    }

    pub fn decisions(&self) -> Vec<Vector> {
        self.steps
            .iter()
            .map(|s| Vector::from_row_slice(&s.x))
            .collect()
    }

    pub fn wall_times_ns(&self) -> Vec<u64> {
        self.steps.iter().map(|s| s.wall_ns).collect()
    }

    /// Attaches externally computed optimizers and fills in the errors.
    pub fn attach_reference(&mut self, refs: &[Vector]) -> Result<()> {
        if refs.len() < self.steps.len() {
            return Err(TvError::DimensionMismatch {
                expected: self.steps.len(),
                got: refs.len(),
            });
        }
        for (step, r) in self.steps.iter_mut().zip(refs) {
            let x = Vector::from_row_slice(&step.x);
            step.error = Some((&x - r).norm());
            step.reference = Some(r.iter().copied().collect());
        }
        Ok(())
    }
}

/// Correction-only running method: `C` corrector passes on each newly
/// sampled cost.
pub fn run_unstructured<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    config: &SolverConfig,
) -> Result<TrajectoryRecord> {
    if !config.predictor.is_none() {
        return Err(TvError::InvalidConfig(
            "unstructured runs take no predictor".into(),
        ));
    }
    run_prediction_correction(oracle, config)
}

/// Prediction-correction loop. Each step predicts with information through
/// `t_k`, then corrects with the newly sampled `f(.; t_{k+1})`.
pub fn run_prediction_correction<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    config: &SolverConfig,
) -> Result<TrajectoryRecord> {
    config.validate(oracle)?;
    let grid = config.grid;
    let corrector = CorrectorKind::new(config.corrector, config.alpha)?;
    let mut kalman = match &config.predictor {
        PredictorKind::Kalman(km) => Some(km.clone()),
        _ => None,
    };

    let mut x = config
        .x0
        .clone()
        .unwrap_or_else(|| Vector::zeros(oracle.dim()));
    let mut record = TrajectoryRecord {
        steps: Vec::with_capacity(grid.len()),
    };
    push_step(&mut record, oracle, 0, grid.time(0), &x, 0);

    for k in 0..grid.k_max {
        let t_next = grid.time(k + 1);
        let started = Instant::now();

        let predicted = predict(oracle, config, kalman.as_mut(), &x, k)?;
        let mut corrected = predicted;
        for _ in 0..config.correction_steps {
            corrected = corrector.step(oracle, &corrected, t_next)?;
        }
        let wall_ns = started.elapsed().as_nanos() as u64;

        x = corrected;
        push_step(&mut record, oracle, k + 1, t_next, &x, wall_ns);
        let last = record.steps.last().expect("step just pushed");
        let magnitude = last.error.unwrap_or_else(|| x.norm());
        if !is_finite(&x) || !(magnitude <= DIVERGENCE_THRESHOLD) {
            return Err(TvError::Diverged {
                step: k + 1,
                partial: Box::new(record),
            });
        }
    }
    Ok(record)
}

fn predict<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    config: &SolverConfig,
    kalman: Option<&mut KalmanModel>,
    x: &Vector,
    k: usize,
) -> Result<Vector> {
    let grid = &config.grid;
    let t_k = grid.time(k);
    let alpha = config.alpha;
    match &config.predictor {
        PredictorKind::None => Ok(x.clone()),
        PredictorKind::Taylor { exact_solve } => {
            let model = build_taylor_model(oracle, x, t_k, grid.h, grid.t0)?;
            let g = oracle.regularizer(t_k);
            if *exact_solve {
                if !g.is_none() {
                    return Err(TvError::InvalidConfig(
                        "exact model solve is only available without a regularizer".into(),
                    ));
                }
                predict_unconstrained(&model)
            } else {
                predict_composite(&model, &g, config.prediction_steps, alpha)
            }
        }
        PredictorKind::Kalman(_) => {
            let km = kalman.expect("Kalman state cloned for the run");
            let param = oracle.parametric().ok_or_else(|| {
                TvError::InvalidConfig("Kalman predictor needs a parametric oracle".into())
            })?;
            let forecast = km.kalman_predict(&param.parameter(t_k))?;
            let b_hat = &km.observation * &forecast.forecast;
            predict_by_parameter(
                param,
                &oracle.regularizer(t_k),
                &b_hat,
                x,
                alpha,
                config.prediction_steps,
            )
        }
        PredictorKind::Hint(hints) => {
            if hints.is_zero() {
                return Ok(x.clone());
            }
            let g = oracle.regularizer(t_k);
            let mut u = x.clone();
            for _ in 0..config.prediction_steps {
                let m = hints.hint_gradient(oracle, &u, k, grid)?;
                u = g.prox(alpha, &(&u - m * alpha))?;
            }
            Ok(u)
        }
        PredictorKind::Clairvoyant => {
            let now = oracle
                .reference_solution(t_k)
                .ok_or(TvError::MissingReference)?;
            let next = oracle
                .reference_solution(grid.time(k + 1))
                .ok_or(TvError::MissingReference)?;
            Ok(x + next - now)
        }
    }
}

fn push_step<P: TimeVaryingProblem + ?Sized>(
    record: &mut TrajectoryRecord,
    oracle: &P,
    k: usize,
    t: f64,
    x: &Vector,
    wall_ns: u64,
) {
    let reference = oracle.reference_solution(t);
    let error = reference.as_ref().map(|r| (x - r).norm());
    record.steps.push(StepRecord {
        k,
        t,
        x: x.iter().copied().collect(),
        reference: reference.map(|r| r.iter().copied().collect()),
        error,
        wall_ns,
    });
}

/// Optimizers `x*(t_k)` on the grid: closed form when the oracle has one,
/// warm-started proximal-gradient solves otherwise.
pub fn reference_trajectory<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    grid: &TimeGrid,
    tolerance: f64,
) -> Result<Vec<Vector>> {
    match grid
        .times()
        .map(|t| oracle.reference_solution(t))
        .collect::<Option<Vec<_>>>()
    {
        Some(refs) => Ok(refs),
        None => iterative_reference(oracle, grid, tolerance),
    }
}

/// Batch-mode ground truth by proximal-gradient iterations, ignoring any
/// closed form the oracle offers.
pub fn iterative_reference<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    grid: &TimeGrid,
    tolerance: f64,
) -> Result<Vec<Vector>> {
    let mut x = Vector::zeros(oracle.dim());
    grid.times()
        .map(|t| {
            x = solve_frozen(oracle, t, &x, tolerance)?;
            Ok(x.clone())
        })
        .collect()
}

/// Solves `min f(.; t) + g` to gradient-mapping residual `tolerance`.
pub fn solve_frozen<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    t: f64,
    start: &Vector,
    tolerance: f64,
) -> Result<Vector> {
    let profile = oracle.profile();
    if !profile.l.is_finite() {
        return Err(TvError::Unsupported(
            "frozen solve needs a finite smoothness constant".into(),
        ));
    }
    let alpha = profile.default_step();
    let g = oracle.regularizer(t);
    let mut x = start.clone();
    for _ in 0..REFERENCE_ITERATION_CAP {
        let next = g.prox(alpha, &(&x - oracle.gradient(&x, t) * alpha))?;
        let residual = (&next - &x).norm() / alpha;
        x = next;
        if residual <= tolerance {
            return Ok(x);
        }
    }
    Err(TvError::IterationCap(REFERENCE_ITERATION_CAP))
}
