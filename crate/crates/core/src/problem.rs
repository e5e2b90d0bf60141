//! Time-varying problem oracles, constraint sets and the proximal primitives
//! every solver is built on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Uniform sampling grid `t_k = t0 + k h`, `k = 0..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub h: f64,
    pub k_max: usize,
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(h: f64, k_max: usize, t0: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(TvError::InvalidConfig(format!(
                "sampling period must be positive, got {h}"
            )));
        }
        if k_max < 1 {
            return Err(TvError::InvalidConfig(
                "horizon must contain at least one step".into(),
            ));
        }
        if !t0.is_finite() {
            return Err(TvError::InvalidConfig("grid origin must be finite".into()));
        }
        Ok(Self { h, k_max, t0 })
    }

    /// Grid covering `[t0, t0 + duration]` with the smallest `k_max` reaching it.
    pub fn spanning(h: f64, duration: f64, t0: f64) -> Result<Self> {
        let k_max = (duration / h).ceil().max(1.0) as usize;
        Self::new(h, k_max, t0)
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    /// Number of samples, `k_max + 1`.
    pub fn len(&self) -> usize {
        self.k_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.k_max).map(move |k| self.time(k))
    }
}

/// Strong convexity `m` and smoothness `L` of the smooth cost.
///
/// `l` may be infinite for barrier surrogates whose curvature is unbounded
/// near the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProfile {
    pub m: f64,
    pub l: f64,
}

impl ConvexityProfile {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        if !(m > 0.0) || !(l >= m) {
            return Err(TvError::InvalidConfig(format!(
                "convexity profile requires 0 < m <= L, got m={m}, L={l}"
            )));
        }
        Ok(Self { m, l })
    }

    /// Step size `2/(m+L)` minimizing the gradient-step contraction factor.
    pub fn default_step(&self) -> f64 {
        2.0 / (self.m + self.l)
    }

    pub fn condition_number(&self) -> f64 {
        self.l / self.m
    }
}

/// Bounds on how fast the optimizer can move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftBounds {
    /// Bound `K` on `|x*(t_k) - x*(t_{k-1})|`.
    pub per_step: f64,
    /// Bound on the norm of the mixed time derivative of the gradient.
    pub time_gradient: f64,
    /// Optional bound on third-order derivatives.
    pub third_order: Option<f64>,
}

impl DriftBounds {
    pub fn new(per_step: f64, time_gradient: f64, third_order: Option<f64>) -> Result<Self> {
        if !(per_step >= 0.0) || !(time_gradient >= 0.0) || third_order.is_some_and(|d| !(d >= 0.0))
        {
            return Err(TvError::InvalidConfig(
                "drift bounds must be nonnegative".into(),
            ));
        }
        Ok(Self {
            per_step,
            time_gradient,
            third_order,
        })
    }

    /// Per-step drift implied by a time-gradient bound: `K = delta0 h / m`.
    pub fn from_time_gradient(delta0: f64, profile: &ConvexityProfile, h: f64) -> Result<Self> {
        Self::new(delta0 * h / profile.m, delta0, None)
    }

    /// Checks `K <= delta0 h / m` up to rounding.
    pub fn is_consistent(&self, profile: &ConvexityProfile, h: f64) -> bool {
        self.per_step <= self.time_gradient * h / profile.m * (1.0 + 1e-12) + 1e-15
    }
}

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub lower: Vector,
    pub upper: Vector,
}

impl BoxSet {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(TvError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(TvError::Infeasible {
                violation: f64::NAN,
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(
            Vector::from_element(dim, lower),
            Vector::from_element(dim, upper),
        )
    }

    pub fn clamp(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(&v, (&l, &u))| v.max(l).min(u)),
        )
    }

    /// Largest bound violation; nonpositive inside the box.
    pub fn violation(&self, x: &Vector) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(&v, (&l, &u))| (l - v).max(v - u))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Intersection of halfspaces `a_i^T x <= b_i`, optionally with a bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub normals: Vec<Vector>,
    pub offsets: Vec<f64>,
    pub bounds: Option<BoxSet>,
}

impl Polytope {
    pub fn new(normals: Vec<Vector>, offsets: Vec<f64>, bounds: Option<BoxSet>) -> Result<Self> {
        if normals.len() != offsets.len() {
            return Err(TvError::InvalidConfig(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let dim = normals
            .first()
            .map(|a| a.len())
            .or_else(|| bounds.as_ref().map(|b| b.lower.len()));
        if let Some(dim) = dim {
            for a in &normals {
                if a.len() != dim {
                    return Err(TvError::DimensionMismatch {
                        expected: dim,
                        got: a.len(),
                    });
                }
                if a.norm() == 0.0 {
                    return Err(TvError::InvalidConfig(
                        "polytope normal must be nonzero".into(),
                    ));
                }
            }
        }
        Ok(Self {
            normals,
            offsets,
            bounds,
        })
    }

    /// Slack `b_i - a_i^T x` of every halfspace.
    pub fn slacks(&self, x: &Vector) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| b - a.dot(x))
            .collect()
    }

    fn violation(&self, x: &Vector) -> f64 {
        let halfspaces = self
            .normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| (a.dot(x) - b) / a.norm())
            .fold(f64::NEG_INFINITY, f64::max);
        let boxed = self
            .bounds
            .as_ref()
            .map_or(f64::NEG_INFINITY, |b| b.violation(x));
        halfspaces.max(boxed)
    }
}

/// Closed convex feasible sets with a projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    WholeSpace,
    Box(BoxSet),
    Ball { center: Vector, radius: f64 },
    Polytope(Polytope),
}

/// Sweep cap for Dykstra's alternating projections.
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;
/// Residual tolerance for Dykstra's alternating projections.
pub const DYKSTRA_TOLERANCE: f64 = 1e-10;
const STALL_SWEEPS: usize = 1_000;

impl ConstraintSet {
    /// Largest constraint violation; nonpositive inside the set.
    pub fn violation(&self, x: &Vector) -> f64 {
        match self {
            ConstraintSet::WholeSpace => f64::NEG_INFINITY,
            ConstraintSet::Box(b) => b.violation(x),
            ConstraintSet::Ball { center, radius } => (x - center).norm() - radius,
            ConstraintSet::Polytope(p) => p.violation(x),
        }
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        match self {
            ConstraintSet::WholeSpace => Ok(x.clone()),
            ConstraintSet::Box(b) => Ok(b.clamp(x)),
            ConstraintSet::Ball { center, radius } => {
                if !(*radius >= 0.0) {
                    return Err(TvError::Infeasible { violation: -radius });
                }
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + d * (*radius / n))
                }
            }
            ConstraintSet::Polytope(p) => dykstra(p, x, DYKSTRA_TOLERANCE, DYKSTRA_MAX_SWEEPS),
        }
    }
}

/// Free-function form of [`ConstraintSet::project`].
pub fn project(set: &ConstraintSet, x: &Vector) -> Result<Vector> {
    set.project(x)
}

fn project_halfspace(a: &Vector, b: f64, y: &Vector) -> Vector {
    let excess = a.dot(y) - b;
    if excess <= 0.0 {
        y.clone()
    } else {
        y - a * (excess / a.norm_squared())
    }
}

/// Dykstra's alternating projections over the halfspaces (and the box, when
/// present) of `poly`.
pub fn dykstra(poly: &Polytope, x: &Vector, tol: f64, max_sweeps: usize) -> Result<Vector> {
    if poly.violation(x) <= 0.0 {
        return Ok(x.clone());
    }
    let n_sets = poly.normals.len() + usize::from(poly.bounds.is_some());
    let mut increments = vec![Vector::zeros(x.len()); n_sets];
    let mut cur = x.clone();
    let mut stalled = 0usize;

    for _ in 0..max_sweeps {
        let start = cur.clone();
        let mut increment_change = 0.0f64;
        for (i, inc) in increments.iter_mut().enumerate() {
            let y = &cur + &*inc;
            let next = if i < poly.normals.len() {
                project_halfspace(&poly.normals[i], poly.offsets[i], &y)
            } else {
                poly.bounds.as_ref().expect("box set present").clamp(&y)
            };
            let new_inc = &y - &next;
            increment_change = increment_change.max((&new_inc - &*inc).norm());
            *inc = new_inc;
            cur = next;
        }
        let scale = 1.0f64.max(cur.norm());
        let change = (&cur - &start).norm();
        let violation = poly.violation(&cur);
        if change <= tol * scale && increment_change <= tol * scale && violation <= tol * scale {
            return Ok(cur);
        }
        if change <= tol * scale && violation > tol.sqrt() * scale {
            stalled += 1;
            if stalled >= STALL_SWEEPS {
                return Err(TvError::Infeasible { violation });
            }
        } else {
            stalled = 0;
        }
    }
    let residual = poly.violation(&cur).max(0.0);
    Err(TvError::ProjectionNotConverged {
        iterations: max_sweeps,
        residual,
    })
}

/// Convex closed proper nonsmooth term `g`.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    None,
    /// `weight * |x|_1`.
    L1 {
        weight: f64,
    },
    /// Indicator of a convex set; its prox is the projection.
    Indicator(ConstraintSet),
    /// A convex term known only by name, with no closed-form proximal map.
    Opaque {
        name: String,
    },
}

impl Regularizer {
    pub fn is_none(&self) -> bool {
        matches!(self, Regularizer::None)
    }

    /// `argmin_u g(u) + |u - x|^2 / (2 alpha)`.
    pub fn prox(&self, alpha: f64, x: &Vector) -> Result<Vector> {
        if !(alpha > 0.0) {
            return Err(TvError::InvalidConfig(format!(
                "prox step must be positive, got {alpha}"
            )));
        }
        match self {
            Regularizer::None => Ok(x.clone()),
            Regularizer::L1 { weight } => Ok(soft_threshold(x, alpha * weight)),
            Regularizer::Indicator(set) => set.project(x),
            Regularizer::Opaque { name } => Err(TvError::Unsupported(format!(
                "no proximal map for regularizer `{name}`"
            ))),
        }
    }

    /// Value of `g`, `+inf` outside an indicator's set.
    pub fn value(&self, x: &Vector) -> Result<f64> {
        match self {
            Regularizer::None => Ok(0.0),
            Regularizer::L1 { weight } => Ok(weight * x.lp_norm(1)),
            Regularizer::Indicator(set) => Ok(if set.contains(x, 1e-9) {
                0.0
            } else {
                f64::INFINITY
            }),
            Regularizer::Opaque { name } => {
                Err(TvError::Unsupported(format!("cannot evaluate `{name}`")))
            }
        }
    }
}

/// Free-function form of [`Regularizer::prox`].
pub fn prox(g: &Regularizer, alpha: f64, x: &Vector) -> Result<Vector> {
    g.prox(alpha, x)
}

/// Coordinatewise soft threshold by `tau`.
pub fn soft_threshold(x: &Vector, tau: f64) -> Vector {
    x.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// A cost `f(x; t)` sampled by the solvers.
///
/// Implementations must be immutable after construction; every solver run
/// borrows the oracle immutably.
pub trait TimeVaryingProblem {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector, t: f64) -> f64;

    fn gradient(&self, x: &Vector, t: f64) -> Vector;

    fn hessian(&self, x: &Vector, t: f64) -> Matrix;

    /// Mixed derivative `d/dt grad_x f(x; t)` when known in closed form.
    /// `None` makes the solvers fall back to finite differences.
    fn time_gradient(&self, _x: &Vector, _t: f64) -> Option<Vector> {
        None
    }

    /// Nonsmooth term (or constraint indicator) active at time `t`.
    fn regularizer(&self, _t: f64) -> Regularizer {
        Regularizer::None
    }

    fn profile(&self) -> ConvexityProfile;

    fn drift(&self) -> Option<DriftBounds> {
        None
    }

    /// Closed-form optimizer `x*(t)` of `f(.; t) + g`, when available.
    fn reference_solution(&self, _t: f64) -> Option<Vector> {
        None
    }

    /// Parameter view `f(x; t) = f(x; b(t))` used by filtering predictors.
    fn parametric(&self) -> Option<&dyn ParametricProblem> {
        None
    }
}

/// A cost whose time dependence is carried by a parameter stream `b(t)`.
pub trait ParametricProblem {
    fn param_dim(&self) -> usize;

    /// Parameter value at time `t`, as revealed by the data stream.
    fn parameter(&self, t: f64) -> Vector;

    /// `grad_x f(x; b)`.
    fn gradient_with(&self, x: &Vector, b: &Vector) -> Vector;
}

/// Backward difference `(grad f(x; t_k) - grad f(x; t_k - h)) / h`.
///
/// `origin` is the first grid time; asking for history before it fails.
pub fn finite_diff_time_grad<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    x: &Vector,
    t_k: f64,
    h: f64,
    origin: f64,
) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(TvError::InvalidConfig(format!(
            "sampling period must be positive, got {h}"
        )));
    }
    let prev = t_k - h;
    if prev < origin - 1e-12 * (1.0 + origin.abs()) {
        return Err(TvError::InsufficientHistory {
            requested: prev,
            origin,
        });
    }
    Ok((oracle.gradient(x, t_k) - oracle.gradient(x, prev)) / h)
}

/// Central difference in `t` of the gradient, for continuous-time flows.
pub(crate) fn central_time_grad<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    x: &Vector,
    t: f64,
) -> Vector {
    let step = 1e-6 * (1.0 + t.abs());
    (oracle.gradient(x, t + step) - oracle.gradient(x, t - step)) / (2.0 * step)
}
