use crate::error::{Result, TvError};
use crate::problem::{
    soft_threshold, ConvexityProfile, Matrix, ParametricProblem, Regularizer, TimeVaryingProblem,
    Vector,
};

/// Planar target for the composite tracking problem.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackingSignal {
    Constant(Vector),
    /// `amplitude (cos(omega t), 0.5 sin(omega t))`.
    Orbit {
        amplitude: f64,
        omega: f64,
    },
}

impl TrackingSignal {
    pub fn value(&self, t: f64) -> Vector {
        match self {
            TrackingSignal::Constant(b) => b.clone(),
            TrackingSignal::Orbit { amplitude, omega } => Vector::from_row_slice(&[
                amplitude * (omega * t).cos(),
                0.5 * amplitude * (omega * t).sin(),
            ]),
        }
    }

    pub fn rate(&self, t: f64) -> Vector {
        match self {
            TrackingSignal::Constant(b) => Vector::zeros(b.len()),
            TrackingSignal::Orbit { amplitude, omega } => Vector::from_row_slice(&[
                -amplitude * omega * (omega * t).sin(),
                0.5 * amplitude * omega * (omega * t).cos(),
            ]),
        }
    }

    fn dim(&self) -> usize {
        match self {
            TrackingSignal::Constant(b) => b.len(),
            TrackingSignal::Orbit { .. } => 2,
        }
    }
}

/// `f(x; t) = |x - b(t)|^2` plus `g(x) = lambda |x|_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotTracking {
    pub lambda: f64,
    pub signal: TrackingSignal,
}

impl RobotTracking {
    pub fn new(lambda: f64, amplitude: f64, omega: f64) -> Result<Self> {
        if !omega.is_finite() || !amplitude.is_finite() {
            return Err(TvError::InvalidConfig(
                "signal parameters must be finite".into(),
            ));
        }
        Self::with_signal(lambda, TrackingSignal::Orbit { amplitude, omega })
    }

    pub fn with_signal(lambda: f64, signal: TrackingSignal) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(TvError::InvalidConfig(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        if signal.dim() == 0 {
            return Err(TvError::InvalidConfig(
                "signal must have positive dimension".into(),
            ));
        }
        Ok(Self { lambda, signal })
    }
}

impl TimeVaryingProblem for RobotTracking {
    fn dim(&self) -> usize {
        self.signal.dim()
    }

    fn value(&self, x: &Vector, t: f64) -> f64 {
        (x - self.signal.value(t)).norm_squared()
    }

    fn gradient(&self, x: &Vector, t: f64) -> Vector {
        (x - self.signal.value(t)) * 2.0
    }

    fn hessian(&self, _x: &Vector, _t: f64) -> Matrix {
        Matrix::identity(self.dim(), self.dim()) * 2.0
    }

    fn time_gradient(&self, _x: &Vector, t: f64) -> Option<Vector> {
        Some(self.signal.rate(t) * -2.0)
    }

    fn regularizer(&self, _t: f64) -> Regularizer {
        if self.lambda == 0.0 {
            Regularizer::None
        } else {
            Regularizer::L1 {
                weight: self.lambda,
            }
        }
    }

    fn profile(&self) -> ConvexityProfile {
        ConvexityProfile { m: 2.0, l: 2.0 }
    }

    fn reference_solution(&self, t: f64) -> Option<Vector> {
        Some(soft_threshold(&self.signal.value(t), self.lambda / 2.0))
    }

    fn parametric(&self) -> Option<&dyn ParametricProblem> {
        Some(self)
    }
}

impl ParametricProblem for RobotTracking {
    fn param_dim(&self) -> usize {
        self.dim()
    }

    fn parameter(&self, t: f64) -> Vector {
        self.signal.value(t)
    }

    fn gradient_with(&self, x: &Vector, b: &Vector) -> Vector {
        (x - b) * 2.0
    }
}
