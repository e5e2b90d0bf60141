//! Single-step correction maps that contract toward the sampled optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::problem::{ConstraintSet, ConvexityProfile, Regularizer, TimeVaryingProblem, Vector};

/// Which first-order map the corrector applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorVariant {
    ProjectedGradient,
    ProximalGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorKind {
    pub variant: CorrectorVariant,
    pub alpha: f64,
}

impl CorrectorKind {
    pub fn new(variant: CorrectorVariant, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(TvError::InvalidConfig(format!(
                "step size must be positive, got {alpha}"
            )));
        }
        Ok(Self { variant, alpha })
    }

    /// Proximal-gradient corrector with the default step `2/(m+L)`.
    pub fn default_for(profile: &ConvexityProfile) -> Self {
        Self {
            variant: CorrectorVariant::ProximalGradient,
            alpha: profile.default_step(),
        }
    }

    pub fn contraction(&self, profile: &ConvexityProfile) -> f64 {
        contraction_factor(profile, self.alpha)
    }

    /// One corrector pass on `f(.; t)`, using the oracle's regularizer at `t`.
    ///
    /// Both variants reduce to the same map here: a projected-gradient step is
    /// a proximal-gradient step whose regularizer is the set indicator.
    pub fn step<P: TimeVaryingProblem + ?Sized>(
        &self,
        oracle: &P,
        x: &Vector,
        t: f64,
    ) -> Result<Vector> {
        let g = oracle.regularizer(t);
        match (&self.variant, &g) {
            (CorrectorVariant::ProjectedGradient, Regularizer::None) => {
                projected_gradient_step(oracle, &ConstraintSet::WholeSpace, x, t, self.alpha)
            }
            (CorrectorVariant::ProjectedGradient, Regularizer::Indicator(set)) => {
                projected_gradient_step(oracle, set, x, t, self.alpha)
            }
            (CorrectorVariant::ProjectedGradient, _) => Err(TvError::Unsupported(
                "projected gradient needs a constraint set, not a general regularizer".into(),
            )),
            (CorrectorVariant::ProximalGradient, g) => {
                proximal_gradient_step(oracle, g, x, t, self.alpha)
            }
        }
    }
}

/// `proj_X(x - alpha grad f(x; t))`.
pub fn projected_gradient_step<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    set: &ConstraintSet,
    x: &Vector,
    t: f64,
    alpha: f64,
) -> Result<Vector> {
    check_step(alpha)?;
    let y = x - oracle.gradient(x, t) * alpha;
    set.project(&y)
}

/// `prox_{alpha g}(x - alpha grad f(x; t))`.
pub fn proximal_gradient_step<P: TimeVaryingProblem + ?Sized>(
    oracle: &P,
    g: &Regularizer,
    x: &Vector,
    t: f64,
    alpha: f64,
) -> Result<Vector> {
    check_step(alpha)?;
    let y = x - oracle.gradient(x, t) * alpha;
    g.prox(alpha, &y)
}

/// `max(|1 - alpha m|, |1 - alpha L|)`; below one iff `0 < alpha < 2/L`.
pub fn contraction_factor(profile: &ConvexityProfile, alpha: f64) -> f64 {
    (1.0 - alpha * profile.m)
        .abs()
        .max((1.0 - alpha * profile.l).abs())
}

fn check_step(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(TvError::InvalidConfig(format!(
            "step size must be positive, got {alpha}"
        )))
    }
}
