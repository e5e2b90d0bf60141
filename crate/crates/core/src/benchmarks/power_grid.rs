use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TvError};
use crate::problem::{
    BoxSet, ConstraintSet, ConvexityProfile, Matrix, Regularizer, TimeVaryingProblem, Vector,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

/// Sum of harmonics plus piecewise-linear noise on a fixed knot spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSignal {
    pub offset: f64,
    pub harmonics: Vec<Harmonic>,
    pub noise: Vec<f64>,
    pub knot_spacing: f64,
}

impl SyntheticSignal {
    pub fn new(offset: f64, harmonics: Vec<Harmonic>) -> Self {
        Self {
            offset,
            harmonics,
            noise: Vec::new(),
            knot_spacing: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, Vec::new())
    }

    /// Adds uniform noise in `[-amplitude, amplitude]` at knots `0, spacing, ...`
    /// covering `[0, horizon]`; held at the last knot afterwards.
    pub fn with_noise(
        mut self,
        amplitude: f64,
        spacing: f64,
        horizon: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(spacing > 0.0) || !(horizon >= 0.0) || !(amplitude >= 0.0) {
            return Err(TvError::InvalidConfig(
                "noise needs positive spacing and nonnegative amplitude".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let knots = (horizon / spacing).ceil() as usize + 2;
        self.noise = (0..knots)
            .map(|_| rng.random_range(-amplitude..=amplitude))
            .collect();
        self.knot_spacing = spacing;
        Ok(self)
    }

    pub fn value(&self, t: f64) -> f64 {
        let smooth: f64 = self
            .harmonics
            .iter()
            .map(|h| h.amplitude * (2.0 * std::f64::consts::PI * t / h.period + h.phase).sin())
            .sum();
        self.offset + smooth + self.noise_at(t)
    }

    fn noise_at(&self, t: f64) -> f64 {
        match self.noise.len() {
            0 => 0.0,
            n => {
                let s = (t / self.knot_spacing).max(0.0);
                let i = s.floor() as usize;
                if i + 1 >= n {
                    return self.noise[n - 1];
                }
                let frac = s - i as f64;
                self.noise[i] * (1.0 - frac) + self.noise[i + 1] * frac
            }
        }
    }
}

/// Real-time setpoint tracking for `n` distributed energy resources, each
/// with an active and a reactive power coordinate:
/// `sum_i 0.5 |x_i|^2 + (gamma / 2) (y_ref(t) - a_x^T x - a_w^T w(t))^2`
/// over per-coordinate boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    pub n_der: usize,
    pub bounds: BoxSet,
    pub gamma: f64,
    pub a_x: Vector,
    pub a_w: Vector,
    pub w: Vec<SyntheticSignal>,
    pub y_ref: SyntheticSignal,
}

pub const DESK_SMOOTHNESS: f64 = 21.0;

impl PowerGrid {
    /// Builds the instance with sensitivity pattern `(1, 0.5)` per resource,
    /// scaled so that `L = target_l`. `box_limits` is `(lo, hi)` per coordinate.
    pub fn new(
        n_der: usize,
        box_limits: (f64, f64),
        gamma: f64,
        target_l: f64,
        w: Vec<SyntheticSignal>,
        y_ref: SyntheticSignal,
    ) -> Result<Self> {
        if n_der == 0 {
            return Err(TvError::InvalidConfig("need at least one resource".into()));
        }
        if !(gamma > 0.0) {
            return Err(TvError::InvalidConfig(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(target_l > 1.0) {
            return Err(TvError::InvalidConfig(format!(
                "smoothness must exceed one, got {target_l}"
            )));
        }
        let pattern = Vector::from_fn(2 * n_der, |j, _| if j % 2 == 0 { 1.0 } else { 0.5 });
        let scale = ((target_l - 1.0) / (gamma * pattern.norm_squared())).sqrt();
        Self::with_sensitivity(n_der, box_limits, gamma, pattern * scale, w, y_ref)
    }

    pub fn with_sensitivity(
        n_der: usize,
        box_limits: (f64, f64),
        gamma: f64,
        a_x: Vector,
        w: Vec<SyntheticSignal>,
        y_ref: SyntheticSignal,
    ) -> Result<Self> {
        if a_x.len() != 2 * n_der {
            return Err(TvError::DimensionMismatch {
                expected: 2 * n_der,
                got: a_x.len(),
            });
        }
        if !(gamma > 0.0) {
            return Err(TvError::InvalidConfig(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        let bounds = BoxSet::uniform(2 * n_der, box_limits.0, box_limits.1)?;
        let a_w = Vector::from_element(w.len(), 1.0);
        Ok(Self {
            n_der,
            bounds,
            gamma,
            a_x,
            a_w,
            w,
            y_ref,
        })
    }

    /// Five resources, `[-50, 50]` boxes, `gamma = 2`, `L = 21`, a daily-shaped
    /// reference and noisy uncontrollable load over `horizon` seconds.
    pub fn desk_scale(horizon: f64, seed: u64) -> Result<Self> {
        let y_ref = SyntheticSignal::new(
            120.0,
            vec![
                Harmonic {
                    amplitude: 380.0,
                    period: 900.0,
                    phase: 0.0,
                },
                Harmonic {
                    amplitude: 60.0,
                    period: 130.0,
                    phase: 0.4,
                },
            ],
        );
        let load = SyntheticSignal::new(
            -40.0,
            vec![
                Harmonic {
                    amplitude: 90.0,
                    period: 300.0,
                    phase: 1.1,
                },
                Harmonic {
                    amplitude: 30.0,
                    period: 47.0,
                    phase: 0.0,
                },
            ],
        )
        .with_noise(8.0, 1.0, horizon, seed)?;
        Self::new(5, (-50.0, 50.0), 2.0, DESK_SMOOTHNESS, vec![load], y_ref)
    }

    pub fn uncontrollable(&self, t: f64) -> Vector {
        Vector::from_iterator(self.w.len(), self.w.iter().map(|s| s.value(t)))
    }

    /// `y_ref(t) - a_w^T w(t)`.
    pub fn effective_reference(&self, t: f64) -> f64 {
        self.y_ref.value(t) - self.a_w.dot(&self.uncontrollable(t))
    }

    fn mismatch(&self, x: &Vector, t: f64) -> f64 {
        self.effective_reference(t) - self.a_x.dot(x)
    }
}

impl TimeVaryingProblem for PowerGrid {
    fn dim(&self) -> usize {
        2 * self.n_der
    }

    fn value(&self, x: &Vector, t: f64) -> f64 {
        0.5 * x.norm_squared() + 0.5 * self.gamma * self.mismatch(x, t).powi(2)
    }

    fn gradient(&self, x: &Vector, t: f64) -> Vector {
        x - &self.a_x * (self.gamma * self.mismatch(x, t))
    }

    fn hessian(&self, _x: &Vector, _t: f64) -> Matrix {
        let n = self.dim();
        Matrix::identity(n, n) + &self.a_x * self.a_x.transpose() * self.gamma
    }

    fn regularizer(&self, _t: f64) -> Regularizer {
        Regularizer::Indicator(ConstraintSet::Box(self.bounds.clone()))
    }

    fn profile(&self) -> ConvexityProfile {
        ConvexityProfile {
            m: 1.0,
            l: 1.0 + self.gamma * self.a_x.norm_squared(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::solve_frozen;

    #[test]
    fn desk_profile_matches_hessian_spectrum() {
        let g = PowerGrid::desk_scale(100.0, 7).unwrap();
        let p = g.profile();
        assert!((p.l - 21.0).abs() < 1e-12);
        let eig = g
            .hessian(&Vector::zeros(10), 0.0)
            .symmetric_eigen()
            .eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - p.m).abs() < 1e-9);
        assert!((hi - p.l).abs() < 1e-9);
    }

    #[test]
    fn zero_signals_give_zero_optimum() {
        let g = PowerGrid::new(
            5,
            (-50.0, 50.0),
            2.0,
            21.0,
            vec![SyntheticSignal::constant(0.0)],
            SyntheticSignal::constant(0.0),
        )
        .unwrap();
        let x = solve_frozen(&g, 3.0, &Vector::from_element(10, 5.0), 1e-12).unwrap();
        assert!(x.norm() < 1e-10);
    }

    #[test]
    fn single_resource_closed_form() {
        let gamma = 2.0;
        let a = 1.5;
        for (y, w) in [(4.0, 1.0), (200.0, -30.0), (-90.0, 10.0)] {
            let g = PowerGrid::with_sensitivity(
                1,
                (-50.0, 50.0),
                gamma,
                Vector::from_row_slice(&[a, 0.0]),
                vec![SyntheticSignal::constant(w)],
                SyntheticSignal::constant(y),
            )
            .unwrap();
            let y_eff = y - w;
            let expect = (gamma * a * y_eff / (1.0 + gamma * a * a)).clamp(-50.0, 50.0);
            let x = solve_frozen(&g, 0.0, &Vector::zeros(2), 1e-12).unwrap();
            assert!((x[0] - expect).abs() < 1e-9, "{} vs {expect}", x[0]);
            assert!(x[1].abs() < 1e-12);
        }
    }

    #[test]
    fn noise_is_seeded_and_interpolated() {
        let a = SyntheticSignal::constant(0.0)
            .with_noise(1.0, 1.0, 10.0, 3)
            .unwrap();
        let b = SyntheticSignal::constant(0.0)
            .with_noise(1.0, 1.0, 10.0, 3)
            .unwrap();
        assert_eq!(a, b);
        let mid = a.value(2.5);
        assert!((mid - 0.5 * (a.noise[2] + a.noise[3])).abs() < 1e-15);
        assert!(a.noise.iter().all(|v| v.abs() <= 1.0));
    }
}
