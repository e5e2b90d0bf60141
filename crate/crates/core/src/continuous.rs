//! Continuous-time prediction-correction flows and the time-varying barrier
//! flow, integrated with fixed-step Runge-Kutta or Euler schemes.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::discrete::{StepRecord, TrajectoryRecord};
use crate::error::{Result, TvError};
use crate::linalg::{is_finite, spd_solve};
use crate::problem::{central_time_grad, ConvexityProfile, Matrix, TimeVaryingProblem, Vector};

/// Maximum number of successive step halvings on a domain violation.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub kappa: f64,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub x0: Vector,
    /// Store every n-th accepted step (the last step is always stored).
    pub record_every: usize,
}

impl FlowConfig {
    pub fn new(kappa: f64, t_span: (f64, f64), dt: f64, x0: Vector) -> Result<Self> {
        let cfg = Self {
            kappa,
            t0: t_span.0,
            t_end: t_span.1,
            dt,
            integrator: Integrator::Rk4,
            x0,
            record_every: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(TvError::InvalidConfig(format!(
                "gain must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(TvError::InvalidConfig(format!(
                "integrator step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > self.t0) {
            return Err(TvError::InvalidConfig(
                "time span must be increasing".into(),
            ));
        }
        if !is_finite(&self.x0) {
            return Err(TvError::InvalidConfig(
                "initial point must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt).round().max(1.0) as usize
    }
}

/// Right-hand side of an autonomous-in-form ODE `x' = F(x, t)`.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&self, x: &Vector, t: f64) -> Result<Vector>;

    /// Distance to the boundary of the field's domain; `None` when the
    /// domain is the whole space.
    fn margin(&self, _x: &Vector, _t: f64) -> Option<f64> {
        None
    }
}

/// Quantities recorded alongside the state at a stored step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub reference: Option<Vector>,
    pub error: Option<f64>,
    pub lyapunov: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub record: TrajectoryRecord,
    pub lyapunov: Vec<f64>,
    /// Smallest domain margin over all accepted steps.
    pub min_margin: Option<f64>,
    pub halvings: usize,
}

/// Fixed-step integration of `field` from `config.x0`, halving a step that
/// leaves the field's domain.
pub fn integrate<F, O>(field: &F, config: &FlowConfig, mut observe: O) -> Result<FlowTrajectory>
where
    F: VectorField + ?Sized,
    O: FnMut(&Vector, f64) -> Observation,
{
    config.validate()?;
    if config.x0.len() != field.dim() {
        return Err(TvError::DimensionMismatch {
            expected: field.dim(),
            got: config.x0.len(),
        });
    }
    let mut x = config.x0.clone();
    let mut min_margin = field.margin(&x, config.t0);
    if let Some(m) = min_margin {
        if !(m > 0.0) {
            return Err(TvError::Domain {
                t: config.t0,
                margin: m,
            });
        }
    }

    let n = config.steps();
    let mut traj = FlowTrajectory {
        record: TrajectoryRecord {
            steps: Vec::with_capacity(n / config.record_every + 2),
        },
        lyapunov: Vec::new(),
        min_margin,
        halvings: 0,
    };
    store(&mut traj, &mut observe, 0, config.t0, &x, 0);

    let mut elapsed = Duration::ZERO;
    for i in 0..n {
        let t = config.t0 + i as f64 * config.dt;
        let t_next = config.t0 + (i + 1) as f64 * config.dt;
        let started = Instant::now();
        x = advance(
            field,
            &x,
            t,
            t_next - t,
            config.integrator,
            0,
            &mut traj.halvings,
        )?;
        elapsed += started.elapsed();
        if !is_finite(&x) {
            store(
                &mut traj,
                &mut observe,
                i + 1,
                t_next,
                &x,
                elapsed.as_nanos() as u64,
            );
            traj.min_margin = min_margin;
            return Err(TvError::Diverged {
                step: i + 1,
                partial: Box::new(traj.record),
            });
        }
        if let Some(m) = field.margin(&x, t_next) {
            min_margin = Some(min_margin.map_or(m, |prev| prev.min(m)));
        }
        if (i + 1) % config.record_every == 0 || i + 1 == n {
            store(
                &mut traj,
                &mut observe,
                i + 1,
                t_next,
                &x,
                elapsed.as_nanos() as u64,
            );
            elapsed = Duration::ZERO;
        }
    }
    traj.min_margin = min_margin;
    Ok(traj)
}

/// `wall_ns` is the integration time since the previous recorded sample.
fn store<O: FnMut(&Vector, f64) -> Observation>(
    traj: &mut FlowTrajectory,
    observe: &mut O,
    k: usize,
    t: f64,
    x: &Vector,
    wall_ns: u64,
) {
    let obs = observe(x, t);
    traj.lyapunov.push(obs.lyapunov);
    traj.record.steps.push(StepRecord {
        k,
        t,
        x: x.iter().copied().collect(),
        reference: obs.reference.map(|r| r.iter().copied().collect()),
        error: obs.error,
        wall_ns,
    });
}

fn advance<F: VectorField + ?Sized>(
    field: &F,
    x: &Vector,
    t: f64,
    dt: f64,
    integrator: Integrator,
    depth: u32,
    halvings: &mut usize,
) -> Result<Vector> {
    let attempt =
        single_step(field, x, t, dt, integrator).and_then(|y| match field.margin(&y, t + dt) {
            Some(m) if !(m > 0.0) => Err(TvError::Domain {
                t: t + dt,
                margin: m,
            }),
            _ => Ok(y),
        });
    match attempt {
        Err(TvError::Domain { t: at, margin }) => {
            if depth >= MAX_HALVINGS {
                return Err(TvError::IntegrationFailed {
                    t: at,
                    reason: format!(
                        "left the domain (margin {margin:.3e}) after {MAX_HALVINGS} halvings"
                    ),
                });
            }
            *halvings += 1;
            let half = dt / 2.0;
            let mid = advance(field, x, t, half, integrator, depth + 1, halvings)?;
            advance(field, &mid, t + half, half, integrator, depth + 1, halvings)
        }
        other => other,
    }
}

fn single_step<F: VectorField + ?Sized>(
    field: &F,
    x: &Vector,
    t: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<Vector> {
    match integrator {
        Integrator::Euler => Ok(x + field.eval(x, t)? * dt),
        Integrator::Rk4 => {
            let half = dt / 2.0;
            let k1 = field.eval(x, t)?;
            let k2 = field.eval(&(x + &k1 * half), t + half)?;
            let k3 = field.eval(&(x + &k2 * half), t + half)?;
            let k4 = field.eval(&(x + &k3 * dt), t + dt)?;
            Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
        }
    }
}

/// `-H(x, t)^{-1} (kappa grad f(x, t) + d/dt grad f(x, t))`.
pub fn optimal_flow_rhs<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    x: &Vector,
    t: f64,
    kappa: f64,
) -> Result<Vector> {
    let drift = oracle
        .time_gradient(x, t)
        .unwrap_or_else(|| central_time_grad(oracle, x, t));
    let rhs = oracle.gradient(x, t) * kappa + drift;
    Ok(-spd_solve(&oracle.hessian(x, t), &rhs)?)
}

struct OptimalFlow<'a, P: ?Sized> {
    oracle: &'a P,
    kappa: f64,
}

impl<P: TimeVaryingProblem + ?Sized> VectorField for OptimalFlow<'_, P> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn eval(&self, x: &Vector, t: f64) -> Result<Vector> {
        optimal_flow_rhs(self.oracle, x, t, self.kappa)
    }
}

/// Integrates the prediction-correction flow; records the tracking error
/// when the oracle has a closed-form optimizer and `V = 0.5 |grad f|^2`.
pub fn integrate_flow<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    config: &FlowConfig,
) -> Result<FlowTrajectory> {
    let field = OptimalFlow {
        oracle,
        kappa: config.kappa,
    };
    integrate(&field, config, |x, t| {
        observe_oracle(oracle, oracle.reference_solution(t), x, t)
    })
}

fn observe_oracle<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    reference: Option<Vector>,
    x: &Vector,
    t: f64,
) -> Observation {
    let error = reference.as_ref().map(|r| (x - r).norm());
    Observation {
        reference,
        error,
        lyapunov: 0.5 * oracle.gradient(x, t).norm_squared(),
    }
}

/// Convex inequality `h(x; t) <= 0` with derivative handles.
pub trait Constraint {
    fn value(&self, x: &Vector, t: f64) -> f64;

    fn gradient(&self, x: &Vector, t: f64) -> Vector;

    fn hessian(&self, x: &Vector, t: f64) -> Matrix;

    /// `dh/dt`; `None` falls back to central differences.
    fn time_derivative(&self, _x: &Vector, _t: f64) -> Option<f64> {
        None
    }

    /// `d/dt grad_x h`; `None` falls back to central differences.
    fn time_gradient(&self, _x: &Vector, _t: f64) -> Option<Vector> {
        None
    }
}

fn time_step(t: f64) -> f64 {
    1e-6 * (1.0 + t.abs())
}

fn constraint_time_derivative(c: &dyn Constraint, x: &Vector, t: f64) -> f64 {
    c.time_derivative(x, t).unwrap_or_else(|| {
        let e = time_step(t);
        (c.value(x, t + e) - c.value(x, t - e)) / (2.0 * e)
    })
}

fn constraint_time_gradient(c: &dyn Constraint, x: &Vector, t: f64) -> Vector {
    c.time_gradient(x, t).unwrap_or_else(|| {
        let e = time_step(t);
        (c.gradient(x, t + e) - c.gradient(x, t - e)) / (2.0 * e)
    })
}

/// Static halfspace `normal^T x - offset <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub normal: Vector,
    pub offset: f64,
}

impl Constraint for LinearConstraint {
    fn value(&self, x: &Vector, _t: f64) -> f64 {
        self.normal.dot(x) - self.offset
    }

    fn gradient(&self, _x: &Vector, _t: f64) -> Vector {
        self.normal.clone()
    }

    fn hessian(&self, _x: &Vector, _t: f64) -> Matrix {
        Matrix::zeros(self.normal.len(), self.normal.len())
    }

    fn time_derivative(&self, _x: &Vector, _t: f64) -> Option<f64> {
        Some(0.0)
    }

    fn time_gradient(&self, _x: &Vector, _t: f64) -> Option<Vector> {
        Some(Vector::zeros(self.normal.len()))
    }
}

pub type ReferenceFn = Box<dyn Fn(f64) -> Vector + Send + Sync>;

/// `min f(x; t)` subject to `h_i(x; t) <= 0`.
pub struct ConstrainedProblem<P> {
    pub objective: P,
    pub constraints: Vec<Box<dyn Constraint + Send + Sync>>,
    reference: Option<ReferenceFn>,
}

impl<P: TimeVaryingProblem> ConstrainedProblem<P> {
    pub fn new(objective: P, constraints: Vec<Box<dyn Constraint + Send + Sync>>) -> Self {
        Self {
            objective,
            constraints,
            reference: None,
        }
    }

    /// Attaches the constrained optimizer `x*(t)` used for error reporting.
    pub fn with_reference(mut self, reference: ReferenceFn) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn reference_solution(&self, t: f64) -> Option<Vector> {
        match &self.reference {
            Some(r) => Some(r(t)),
            None if self.constraints.is_empty() => self.objective.reference_solution(t),
            None => None,
        }
    }

    pub fn constraint_values(&self, x: &Vector, t: f64) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x, t)).collect()
    }
}

/// `max(0, max_i h_i(x0; t0)) + margin`.
pub fn initial_slack<P: TimeVaryingProblem>(
    problem: &ConstrainedProblem<P>,
    x0: &Vector,
    t0: f64,
    margin: f64,
) -> Result<f64> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(TvError::InvalidConfig(format!(
            "slack margin must be positive, got {margin}"
        )));
    }
    let worst = problem
        .constraint_values(x0, t0)
        .into_iter()
        .fold(0.0, f64::max);
    Ok(worst + margin)
}

/// `c(t) = c0 exp(c_rate t)` and `s(t) = s0 exp(-gamma t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSchedules {
    pub c0: f64,
    pub c_rate: f64,
    pub s0: f64,
    pub gamma: f64,
}

impl BarrierSchedules {
    pub fn new(c0: f64, c_rate: f64, s0: f64, gamma: f64) -> Result<Self> {
        if !(c0 > 0.0) || !(c_rate >= 0.0) || !(gamma >= 0.0) || !(s0 >= 0.0) {
            return Err(TvError::InvalidConfig(
                "schedules need c0 > 0 and nonnegative rates and slack".into(),
            ));
        }
        if ![c0, c_rate, s0, gamma].iter().all(|v| v.is_finite()) {
            return Err(TvError::InvalidConfig(
                "schedule parameters must be finite".into(),
            ));
        }
        Ok(Self {
            c0,
            c_rate,
            s0,
            gamma,
        })
    }

    /// `c0 = 1`, rate `0.5`, `gamma = 0.5`.
    pub fn generic(s0: f64) -> Result<Self> {
        Self::new(1.0, 0.5, s0, 0.5)
    }

    pub fn c(&self, t: f64) -> f64 {
        self.c0 * (self.c_rate * t).exp()
    }

    pub fn c_dot(&self, t: f64) -> f64 {
        self.c_rate * self.c(t)
    }

    pub fn s(&self, t: f64) -> f64 {
        self.s0 * (-self.gamma * t).exp()
    }

    pub fn s_dot(&self, t: f64) -> f64 {
        -self.gamma * self.s(t)
    }

    /// First time at which `c(t)` reaches `level`.
    pub fn time_to_reach(&self, level: f64) -> f64 {
        if level <= self.c0 {
            0.0
        } else {
            (level / self.c0).ln() / self.c_rate
        }
    }
}

/// `Phi(x; t) = f(x; t) - (1/c(t)) sum_i log(s(t) - h_i(x; t))`.
pub struct BarrierOracle<'a, P> {
    pub problem: &'a ConstrainedProblem<P>,
    pub schedules: BarrierSchedules,
}

pub fn barrier_oracle<P: TimeVaryingProblem>(
    problem: &ConstrainedProblem<P>,
    schedules: BarrierSchedules,
) -> BarrierOracle<'_, P> {
    BarrierOracle { problem, schedules }
}

impl<P: TimeVaryingProblem> BarrierOracle<'_, P> {
    /// `s(t) - h_i(x; t)` for every constraint, or a domain error.
    pub fn slacks(&self, x: &Vector, t: f64) -> Result<Vec<f64>> {
        let s = self.schedules.s(t);
        let u: Vec<f64> = self
            .problem
            .constraints
            .iter()
            .map(|c| s - c.value(x, t))
            .collect();
        let margin = u.iter().copied().fold(f64::INFINITY, f64::min);
        if u.is_empty() || margin > 0.0 {
            Ok(u)
        } else {
            Err(TvError::Domain { t, margin })
        }
    }

    pub fn try_value(&self, x: &Vector, t: f64) -> Result<f64> {
        let u = self.slacks(x, t)?;
        let f = self.problem.objective.value(x, t);
        if u.is_empty() {
            return Ok(f);
        }
        Ok(f - u.iter().map(|v| v.ln()).sum::<f64>() / self.schedules.c(t))
    }

    pub fn try_gradient(&self, x: &Vector, t: f64) -> Result<Vector> {
        let u = self.slacks(x, t)?;
        let mut g = self.problem.objective.gradient(x, t);
        if u.is_empty() {
            return Ok(g);
        }
        let inv_c = 1.0 / self.schedules.c(t);
        for (c, ui) in self.problem.constraints.iter().zip(&u) {
            g += c.gradient(x, t) * (inv_c / ui);
        }
        Ok(g)
    }

    pub fn try_hessian(&self, x: &Vector, t: f64) -> Result<Matrix> {
        let u = self.slacks(x, t)?;
        let mut h = self.problem.objective.hessian(x, t);
        if u.is_empty() {
            return Ok(h);
        }
        let inv_c = 1.0 / self.schedules.c(t);
        for (c, ui) in self.problem.constraints.iter().zip(&u) {
            let gi = c.gradient(x, t);
            h += c.hessian(x, t) * (inv_c / ui) + &gi * gi.transpose() * (inv_c / (ui * ui));
        }
        Ok(h)
    }

    /// `d/dt grad_x Phi`, including the `c'` and `s'` terms.
    pub fn try_time_gradient(&self, x: &Vector, t: f64) -> Result<Vector> {
        let u = self.slacks(x, t)?;
        let objective = &self.problem.objective;
        let mut out = objective
            .time_gradient(x, t)
            .unwrap_or_else(|| central_time_grad(objective, x, t));
        if u.is_empty() {
            return Ok(out);
        }
        let c = self.schedules.c(t);
        let c_dot = self.schedules.c_dot(t);
        let s_dot = self.schedules.s_dot(t);
        for (con, ui) in self.problem.constraints.iter().zip(&u) {
            let con: &dyn Constraint = con.as_ref();
            let gi = con.gradient(x, t);
            let u_dot = s_dot - constraint_time_derivative(con, x, t);
            out += &gi * (-c_dot / (c * c * ui));
            out += constraint_time_gradient(con, x, t) * (1.0 / (c * ui));
            out -= gi * (u_dot / (c * ui * ui));
        }
        Ok(out)
    }
}

impl<P: TimeVaryingProblem> TimeVaryingProblem for BarrierOracle<'_, P> {
    fn dim(&self) -> usize {
        self.problem.objective.dim()
    }

    /// `+inf` outside the domain.
    fn value(&self, x: &Vector, t: f64) -> f64 {
        self.try_value(x, t).unwrap_or(f64::INFINITY)
    }

    /// NaN outside the domain.
    fn gradient(&self, x: &Vector, t: f64) -> Vector {
        self.try_gradient(x, t)
            .unwrap_or_else(|_| Vector::from_element(x.len(), f64::NAN))
    }

    fn hessian(&self, x: &Vector, t: f64) -> Matrix {
        self.try_hessian(x, t)
            .unwrap_or_else(|_| Matrix::from_element(x.len(), x.len(), f64::NAN))
    }

    fn time_gradient(&self, x: &Vector, t: f64) -> Option<Vector> {
        self.try_time_gradient(x, t).ok()
    }

    fn profile(&self) -> ConvexityProfile {
        let inner = self.problem.objective.profile();
        if self.problem.constraints.is_empty() {
            inner
        } else {
            ConvexityProfile {
                m: inner.m,
                l: f64::INFINITY,
            }
        }
    }

    fn reference_solution(&self, t: f64) -> Option<Vector> {
        self.problem.reference_solution(t)
    }
}

struct BarrierFlow<'a, 'b, P> {
    oracle: &'a BarrierOracle<'b, P>,
    kappa: f64,
}

impl<P: TimeVaryingProblem> VectorField for BarrierFlow<'_, '_, P> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn eval(&self, x: &Vector, t: f64) -> Result<Vector> {
        if self.oracle.problem.constraints.is_empty() {
            return optimal_flow_rhs(&self.oracle.problem.objective, x, t, self.kappa);
        }
        let rhs =
            self.oracle.try_gradient(x, t)? * self.kappa + self.oracle.try_time_gradient(x, t)?;
        Ok(-spd_solve(&self.oracle.try_hessian(x, t)?, &rhs)?)
    }

    fn margin(&self, x: &Vector, t: f64) -> Option<f64> {
        if self.oracle.problem.constraints.is_empty() {
            return None;
        }
        let s = self.oracle.schedules.s(t);
        Some(
            self.oracle
                .problem
                .constraints
                .iter()
                .map(|c| s - c.value(x, t))
                .fold(f64::INFINITY, f64::min),
        )
    }
}

/// Integrates `x' = -grad^2 Phi^{-1} (kappa grad Phi + d/dt grad Phi)`.
pub fn barrier_flow<P: TimeVaryingProblem>(
    problem: &ConstrainedProblem<P>,
    schedules: BarrierSchedules,
    config: &FlowConfig,
) -> Result<FlowTrajectory> {
    let oracle = barrier_oracle(problem, schedules);
    let field = BarrierFlow {
        oracle: &oracle,
        kappa: config.kappa,
    };
    integrate(&field, config, |x, t| {
        let reference = problem.reference_solution(t);
        let error = reference.as_ref().map(|r| (x - r).norm());
        let lyapunov = oracle
            .try_gradient(x, t)
            .map(|g| 0.5 * g.norm_squared())
            .unwrap_or(f64::INFINITY);
        Observation {
            reference,
            error,
            lyapunov,
        }
    })
}
