//! Prediction models that extrapolate the optimizer from `t_k` to `t_{k+1}`
//! before the new cost is revealed.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::linalg::spd_solve;
use crate::problem::{
    finite_diff_time_grad, Matrix, ParametricProblem, Regularizer, TimeGrid, TimeVaryingProblem,
    Vector,
};

/// Where the time term of a Taylor model came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeTermSource {
    Analytic,
    BackwardDifference,
    /// No history yet (first step without an analytic derivative); the term is zero.
    Unavailable,
}

/// First-order Taylor surrogate of the optimality condition around
/// `(anchor, t_k)`:
///
/// `phi(x) = gradient + hessian (x - anchor) + time_term`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub anchor: Vector,
    pub gradient: Vector,
    pub hessian: Matrix,
    /// `h` times the mixed derivative `d/dt grad f(anchor; t_k)`.
    pub time_term: Vector,
    pub time_source: TimeTermSource,
}

impl QuadraticModel {
    /// Model gradient `phi(x)`.
    pub fn model_gradient(&self, x: &Vector) -> Vector {
        &self.gradient + &self.hessian * (x - &self.anchor) + &self.time_term
    }
}

/// Builds the Taylor model from oracle evaluations at `(anchor, t_k)` only.
///
/// The mixed derivative is analytic when the oracle provides it, a backward
/// difference over `(t_k - h, t_k)` otherwise, and zero when `t_k - h` falls
/// before `origin`.
pub fn build_taylor_model<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    anchor: &Vector,
    t_k: f64,
    h: f64,
    origin: f64,
) -> Result<QuadraticModel> {
    if anchor.len() != oracle.dim() {
        return Err(TvError::DimensionMismatch {
            expected: oracle.dim(),
            got: anchor.len(),
        });
    }
    let hessian = oracle.hessian(anchor, t_k);
    if hessian.clone().cholesky().is_none() {
        return Err(TvError::NotPositiveDefinite);
    }
    let (time_term, time_source) = match oracle.time_gradient(anchor, t_k) {
        Some(d) => (d * h, TimeTermSource::Analytic),
        None => match finite_diff_time_grad(oracle, anchor, t_k, h, origin) {
            Ok(d) => (d * h, TimeTermSource::BackwardDifference),
            Err(TvError::InsufficientHistory { .. }) => {
                (Vector::zeros(anchor.len()), TimeTermSource::Unavailable)
            }
            Err(e) => return Err(e),
        },
    };
    Ok(QuadraticModel {
        anchor: anchor.clone(),
        gradient: oracle.gradient(anchor, t_k),
        hessian,
        time_term,
        time_source,
    })
}

/// Unique root of the model, `anchor - H^{-1} (gradient + time_term)`.
pub fn predict_unconstrained(model: &QuadraticModel) -> Result<Vector> {
    let rhs = &model.gradient + &model.time_term;
    let step = spd_solve(&model.hessian, &rhs)?;
    Ok(&model.anchor - step)
}

/// `passes` proximal-gradient iterations on the model generalized equation,
/// started at the anchor.
pub fn predict_composite(
    model: &QuadraticModel,
    g: &Regularizer,
    passes: usize,
    alpha: f64,
) -> Result<Vector> {
    if passes == 0 {
        return Err(TvError::InvalidConfig(
            "composite prediction needs at least one pass".into(),
        ));
    }
    if !(alpha > 0.0) {
        return Err(TvError::InvalidConfig(format!(
            "step size must be positive, got {alpha}"
        )));
    }
    let mut u = model.anchor.clone();
    for _ in 0..passes {
        let y = &u - model.model_gradient(&u) * alpha;
        u = g.prox(alpha, &y)?;
    }
    Ok(u)
}

/// Linear time-invariant parameter model
/// `b_{k+1} = transition b_k + w_k`, `y_k = observation b_k + n_k`,
/// tracked with a Kalman filter.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    pub transition: Matrix,
    pub observation: Matrix,
    pub process_noise: Matrix,
    pub observation_noise: Matrix,
    /// Prior mean of the state for the next observation.
    pub state: Vector,
    /// Prior covariance of the state for the next observation.
    pub covariance: Matrix,
}

/// One filter step: posterior at `t_k` and forecast for `t_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanForecast {
    pub posterior: Vector,
    pub forecast: Vector,
}

impl KalmanModel {
    /// Builds a model; `covariance` defaults to the identity.
    pub fn new(
        transition: Matrix,
        observation: Matrix,
        process_noise: Matrix,
        observation_noise: Matrix,
        state: Vector,
        covariance: Option<Matrix>,
    ) -> Result<Self> {
        let l = state.len();
        let q = observation.nrows();
        let covariance = covariance.unwrap_or_else(|| Matrix::identity(l, l));
        let shapes = [
            (transition.shape(), (l, l), "transition"),
            (observation.shape(), (q, l), "observation"),
            (process_noise.shape(), (l, l), "process noise"),
            (observation_noise.shape(), (q, q), "observation noise"),
            (covariance.shape(), (l, l), "covariance"),
        ];
        for (got, want, what) in shapes {
            if got != want {
                return Err(TvError::InvalidConfig(format!(
                    "{what} has shape {got:?}, expected {want:?}"
                )));
            }
        }
        for (m, what) in [
            (&process_noise, "process noise"),
            (&observation_noise, "observation noise"),
            (&covariance, "covariance"),
        ] {
            if !is_symmetric_psd(m) {
                return Err(TvError::InvalidConfig(format!(
                    "{what} must be symmetric positive semidefinite"
                )));
            }
        }
        Ok(Self {
            transition,
            observation,
            process_noise,
            observation_noise,
            state,
            covariance,
        })
    }

    /// Measurement update with `y` followed by the time update.
    pub fn kalman_predict(&mut self, y: &Vector) -> Result<KalmanForecast> {
        if y.len() != self.observation.nrows() {
            return Err(TvError::DimensionMismatch {
                expected: self.observation.nrows(),
                got: y.len(),
            });
        }
        let obs = &self.observation;
        let p = &self.covariance;
        let innovation_cov = obs * p * obs.transpose() + &self.observation_noise;
        let chol = innovation_cov
            .cholesky()
            .ok_or(TvError::SingularInnovation)?;
        // gain^T = S^{-1} (Obs P)
        let gain = chol.solve(&(obs * p)).transpose();
        let residual = y - obs * &self.state;
        let posterior = &self.state + &gain * residual;

        let l = self.state.len();
        let i_kh = Matrix::identity(l, l) - &gain * obs;
        let post_cov =
            &i_kh * p * i_kh.transpose() + &gain * &self.observation_noise * gain.transpose();

        let forecast = &self.transition * &posterior;
        let prior_cov =
            &self.transition * &post_cov * self.transition.transpose() + &self.process_noise;
        self.state = forecast.clone();
        self.covariance = symmetrize(prior_cov);
        Ok(KalmanForecast {
            posterior,
            forecast,
        })
    }
}

fn symmetrize(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}

fn is_symmetric_psd(m: &Matrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = 1.0f64.max(m.amax());
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return false;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .all(|&e| e >= -1e-10 * scale)
}

/// Approximate minimizer of `f(.; b_hat) + g` by `budget` proximal-gradient
/// passes warm-started at `anchor`.
pub fn predict_by_parameter(
    problem: &dyn ParametricProblem,
    g: &Regularizer,
    b_hat: &Vector,
    anchor: &Vector,
    alpha: f64,
    budget: usize,
) -> Result<Vector> {
    if b_hat.len() != problem.param_dim() {
        return Err(TvError::DimensionMismatch {
            expected: problem.param_dim(),
            got: b_hat.len(),
        });
    }
    if !(alpha > 0.0) {
        return Err(TvError::InvalidConfig(format!(
            "step size must be positive, got {alpha}"
        )));
    }
    let mut u = anchor.clone();
    for _ in 0..budget {
        let y = &u - problem.gradient_with(&u, b_hat) * alpha;
        u = g.prox(alpha, &y)?;
    }
    Ok(u)
}

/// Sequence of gradient approximators `m_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum HintStream {
    /// `m_k = 0`: no knowledge of the future.
    Zero,
    /// `m_k = grad f(.; t_k)`.
    CurrentGradient,
    /// `m_k = grad f(.; t_{k+1})`; looks ahead and is only a benchmark.
    NextGradient,
    /// Fixed vectors, one per step.
    Sequence(Vec<Vector>),
}

impl HintStream {
    pub fn is_zero(&self) -> bool {
        matches!(self, HintStream::Zero)
    }

    /// Hint `m_k` evaluated at `x`.
    pub fn hint_gradient<P: TimeVaryingProblem + ?Sized>(
        &self,
        oracle: &P,
        x: &Vector,
        k: usize,
        grid: &TimeGrid,
    ) -> Result<Vector> {
        match self {
            HintStream::Zero => Ok(Vector::zeros(x.len())),
            HintStream::CurrentGradient => Ok(oracle.gradient(x, grid.time(k))),
            HintStream::NextGradient => Ok(oracle.gradient(x, grid.time(k + 1))),
            HintStream::Sequence(seq) => {
                let m = seq.get(k).ok_or(TvError::HintsExhausted(k))?;
                if m.len() != x.len() {
                    return Err(TvError::DimensionMismatch {
                        expected: x.len(),
                        got: m.len(),
                    });
                }
                Ok(m.clone())
            }
        }
    }
}

/// Free-function form of [`HintStream::hint_gradient`].
pub fn hint_gradient<P: TimeVaryingProblem + ?Sized>(
    hints: &HintStream,
    oracle: &P,
    x: &Vector,
    k: usize,
    grid: &TimeGrid,
) -> Result<Vector> {
    hints.hint_gradient(oracle, x, k, grid)
}
