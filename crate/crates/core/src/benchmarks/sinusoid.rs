use crate::error::{Result, TvError};
use crate::predictors::KalmanModel;
use crate::problem::{
    ConvexityProfile, DriftBounds, Matrix, ParametricProblem, TimeVaryingProblem, Vector,
};

/// `f(x; t) = 0.5 |x - b(t)|^2` with `b(t) = amplitude cos(omega t) 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidQuadratic {
    pub omega: f64,
    pub amplitude: f64,
    pub dim: usize,
}

impl SinusoidQuadratic {
    pub fn new(omega: f64, amplitude: f64, dim: usize) -> Result<Self> {
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(TvError::InvalidConfig(format!(
                "omega must be nonnegative, got {omega}"
            )));
        }
        if !amplitude.is_finite() {
            return Err(TvError::InvalidConfig("amplitude must be finite".into()));
        }
        if dim == 0 {
            return Err(TvError::InvalidConfig("dimension must be positive".into()));
        }
        Ok(Self {
            omega,
            amplitude,
            dim,
        })
    }

    pub fn target(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t).cos()
    }

    fn target_rate(&self, t: f64) -> f64 {
        -self.amplitude * self.omega * (self.omega * t).sin()
    }

    /// `max_t |b'(t)|`, the bound on the mixed time derivative of the gradient.
    pub fn max_time_gradient(&self) -> f64 {
        self.amplitude.abs() * self.omega * (self.dim as f64).sqrt()
    }

    pub fn drift_for(&self, h: f64) -> Result<DriftBounds> {
        DriftBounds::from_time_gradient(self.max_time_gradient(), &self.profile(), h)
    }

    /// Exact sampled model of the scalar parameter as a harmonic oscillator
    /// with state `(b, b')` and observation `b`. The prior mean is zero.
    pub fn oscillator_model(
        &self,
        h: f64,
        process_noise: f64,
        observation_noise: f64,
        covariance: Option<Matrix>,
    ) -> Result<KalmanModel> {
        if !(h > 0.0) {
            return Err(TvError::InvalidConfig(format!(
                "sampling period must be positive, got {h}"
            )));
        }
        let w = self.omega;
        let (c, s) = ((w * h).cos(), (w * h).sin());
        let transition = if w == 0.0 {
            Matrix::from_row_slice(2, 2, &[1.0, h, 0.0, 1.0])
        } else {
            Matrix::from_row_slice(2, 2, &[c, s / w, -w * s, c])
        };
        KalmanModel::new(
            transition,
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::identity(2, 2) * process_noise,
            Matrix::identity(1, 1) * observation_noise,
            Vector::zeros(2),
            covariance,
        )
    }
}

impl TimeVaryingProblem for SinusoidQuadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector, t: f64) -> f64 {
        let b = self.target(t);
        0.5 * x.iter().map(|xi| (xi - b).powi(2)).sum::<f64>()
    }

    fn gradient(&self, x: &Vector, t: f64) -> Vector {
        x.add_scalar(-self.target(t))
    }

    fn hessian(&self, _x: &Vector, _t: f64) -> Matrix {
        Matrix::identity(self.dim, self.dim)
    }

    fn time_gradient(&self, _x: &Vector, t: f64) -> Option<Vector> {
        Some(Vector::from_element(self.dim, -self.target_rate(t)))
    }

    fn profile(&self) -> ConvexityProfile {
        ConvexityProfile { m: 1.0, l: 1.0 }
    }

    fn reference_solution(&self, t: f64) -> Option<Vector> {
        Some(Vector::from_element(self.dim, self.target(t)))
    }

    fn parametric(&self) -> Option<&dyn ParametricProblem> {
        Some(self)
    }
}

impl ParametricProblem for SinusoidQuadratic {
    fn param_dim(&self) -> usize {
        1
    }

    fn parameter(&self, t: f64) -> Vector {
        Vector::from_element(1, self.target(t))
    }

    fn gradient_with(&self, x: &Vector, b: &Vector) -> Vector {
        x.add_scalar(-b[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_when_omega_zero() {
        let f = SinusoidQuadratic::new(0.0, 1.5, 2).unwrap();
        for t in [0.0, 3.0, 100.0] {
            assert_eq!(
                f.reference_solution(t).unwrap(),
                Vector::from_element(2, 1.5)
            );
        }
        assert_eq!(f.max_time_gradient(), 0.0);
        assert!(SinusoidQuadratic::new(-1.0, 1.0, 1).is_err());
    }

    #[test]
    fn drift_bound_holds() {
        let f = SinusoidQuadratic::new(1.0, 1.0, 1).unwrap();
        assert_eq!(f.max_time_gradient(), 1.0);
        let h = 0.05;
        let k = f.drift_for(h).unwrap().per_step;
        assert!((k - h).abs() < 1e-15);
        for i in 0..2000 {
            let t = i as f64 * h;
            let step =
                (f.reference_solution(t + h).unwrap() - f.reference_solution(t).unwrap()).norm();
            assert!(step <= k + 1e-15);
        }
    }

    #[test]
    fn oscillator_transition_propagates_exactly() {
        let f = SinusoidQuadratic::new(0.7, 2.0, 1).unwrap();
        let h = 0.1;
        let km = f.oscillator_model(h, 0.0, 0.0, None).unwrap();
        let mut state = Vector::from_row_slice(&[f.target(0.0), f.target_rate(0.0)]);
        for k in 1..50 {
            state = &km.transition * state;
            let t = k as f64 * h;
            assert!((state[0] - f.target(t)).abs() < 1e-12);
            assert!((state[1] - f.target_rate(t)).abs() < 1e-12);
        }
        let still = SinusoidQuadratic::new(0.0, 1.0, 1)
            .unwrap()
            .oscillator_model(h, 0.0, 0.0, None)
            .unwrap();
        assert_eq!(
            still.transition,
            Matrix::from_row_slice(2, 2, &[1.0, h, 0.0, 1.0])
        );
    }
}
