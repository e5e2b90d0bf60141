//! Dense symmetric positive-definite solves shared by predictors and flows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TvError};

/// Largest accepted condition estimate before a solve is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `a * x = rhs` for symmetric positive-definite `a` with a Cholesky
/// factorization.
///
/// The condition estimate is the squared ratio of the extreme Cholesky
/// pivots, a lower bound on the true 2-norm condition number.
pub fn spd_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != rhs.len() || !a.is_square() {
        return Err(TvError::DimensionMismatch {
            expected: a.nrows(),
            got: rhs.len(),
        });
    }
    let chol = a.clone().cholesky().ok_or(TvError::NotPositiveDefinite)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
        (lo.min(d), hi.max(d))
    });
    if !(lo > 0.0) || !lo.is_finite() {
        return Err(TvError::NotPositiveDefinite);
    }
    let cond = (hi / lo).powi(2);
    if cond > MAX_CONDITION {
        return Err(TvError::IllConditioned(cond));
    }
    Ok(chol.solve(rhs))
}

pub(crate) fn is_finite(x: &DVector<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}
