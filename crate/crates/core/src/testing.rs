//! Small oracles shared by unit tests.

use std::cell::Cell;

use crate::problem::{
    ConvexityProfile, Matrix, ParametricProblem, Regularizer, TimeVaryingProblem, Vector,
};

fn s(v: f64) -> Vector {
    Vector::from_element(1, v)
}

/// `f(x; t) = 0.5 (x - t)^2`.
pub struct LinearDrift;

impl TimeVaryingProblem for LinearDrift {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector, t: f64) -> f64 {
        0.5 * (x[0] - t).powi(2)
    }
    fn gradient(&self, x: &Vector, t: f64) -> Vector {
        s(x[0] - t)
    }
    fn hessian(&self, _x: &Vector, _t: f64) -> Matrix {
        Matrix::identity(1, 1)
    }
    fn time_gradient(&self, _x: &Vector, _t: f64) -> Option<Vector> {
        Some(s(-1.0))
    }
    fn profile(&self) -> ConvexityProfile {
        ConvexityProfile::new(1.0, 1.0).unwrap()
    }
    fn reference_solution(&self, t: f64) -> Option<Vector> {
        Some(s(t))
    }
}

/// Hides the analytic mixed derivative of the wrapped oracle.
pub struct HideTimeGradient<P>(pub P);

impl<P: TimeVaryingProblem> TimeVaryingProblem for HideTimeGradient<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Vector, t: f64) -> f64 {
        self.0.value(x, t)
    }
    fn gradient(&self, x: &Vector, t: f64) -> Vector {
        self.0.gradient(x, t)
    }
    fn hessian(&self, x: &Vector, t: f64) -> Matrix {
        self.0.hessian(x, t)
    }
    fn regularizer(&self, t: f64) -> Regularizer {
        self.0.regularizer(t)
    }
    fn profile(&self) -> ConvexityProfile {
        self.0.profile()
    }
    fn reference_solution(&self, t: f64) -> Option<Vector> {
        self.0.reference_solution(t)
    }
}

/// `f(x) = 0.5 c x^2`, deliberately allowed to be nonconvex.
pub struct Curved(pub f64);

impl TimeVaryingProblem for Curved {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector, _t: f64) -> f64 {
        0.5 * self.0 * x[0] * x[0]
    }
    fn gradient(&self, x: &Vector, _t: f64) -> Vector {
        s(self.0 * x[0])
    }
    fn hessian(&self, _x: &Vector, _t: f64) -> Matrix {
        Matrix::from_element(1, 1, self.0)
    }
    fn profile(&self) -> ConvexityProfile {
        ConvexityProfile { m: 1.0, l: 1.0 }
    }
}

/// Records the latest time at which the wrapped oracle was queried.
pub struct Instrumented<P> {
    inner: P,
    latest: Cell<f64>,
}

impl<P> Instrumented<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            latest: Cell::new(f64::NEG_INFINITY),
        }
    }

    pub fn latest_query(&self) -> f64 {
        self.latest.get()
    }

    fn touch(&self, t: f64) {
        self.latest.set(self.latest.get().max(t));
    }
}

impl<P: TimeVaryingProblem> TimeVaryingProblem for Instrumented<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Vector, t: f64) -> f64 {
        self.touch(t);
        self.inner.value(x, t)
    }
    fn gradient(&self, x: &Vector, t: f64) -> Vector {
        self.touch(t);
        self.inner.gradient(x, t)
    }
    fn hessian(&self, x: &Vector, t: f64) -> Matrix {
        self.touch(t);
        self.inner.hessian(x, t)
    }
    fn time_gradient(&self, x: &Vector, t: f64) -> Option<Vector> {
        self.touch(t);
        self.inner.time_gradient(x, t)
    }
    fn regularizer(&self, t: f64) -> Regularizer {
        self.touch(t);
        self.inner.regularizer(t)
    }
    fn profile(&self) -> ConvexityProfile {
        self.inner.profile()
    }
    fn parametric(&self) -> Option<&dyn ParametricProblem> {
        self.inner.parametric()
    }
}
