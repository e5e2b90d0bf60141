//! Tracking metrics: asymptotic tracking error, time rate, convergence
//! steps, structure gain, and the log-log slope of an `h` sweep.

use serde::{Deserialize, Serialize};

use crate::discrete::TrajectoryRecord;
use crate::error::{Result, TvError};
use crate::problem::Vector;

pub const DEFAULT_WINDOW_FRACTION: f64 = 0.2;
pub const DEFAULT_BAND_FACTOR: f64 = 1.1;

/// Trailing-window statistics of the tracking error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteStats {
    /// Window maximum, the proxy for the limsup.
    pub max: f64,
    pub mean: f64,
    pub window_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrEstimate {
    pub steps: usize,
    /// False when the error never settles inside the band; `steps` is then
    /// the horizon length.
    pub entered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureGain {
    /// Structured over unstructured ATE.
    pub sg: f64,
    /// Unstructured over structured ATE; above one favors the structured method.
    pub improvement_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ate: f64,
    pub ate_mean: f64,
    pub tr: f64,
    pub cr_steps: usize,
    pub cr_entered: bool,
    pub sg: Option<f64>,
    pub improvement_ratio: Option<f64>,
    pub slope: Option<f64>,
    pub path_length: Option<f64>,
}

impl MetricsReport {
    pub fn from_trajectory(
        traj: &TrajectoryRecord,
        h: f64,
        window_fraction: f64,
        band_factor: f64,
    ) -> Result<Self> {
        let ate = compute_ate(traj, window_fraction)?;
        let cr = estimate_cr(traj, window_fraction, band_factor)?;
        Ok(Self {
            ate: ate.max,
            ate_mean: ate.mean,
            tr: compute_tr(traj, h)?,
            cr_steps: cr.steps,
            cr_entered: cr.entered,
            sg: None,
            improvement_ratio: None,
            slope: None,
            path_length: traj.references().map(|r| path_length(&r)),
        })
    }

    pub fn with_gain(mut self, gain: StructureGain) -> Self {
        self.sg = Some(gain.sg);
        self.improvement_ratio = Some(gain.improvement_ratio);
        self
    }
}

fn window_len(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TvError::Metric(format!(
            "window fraction must be in (0, 1], got {fraction}"
        )));
    }
    if n == 0 {
        return Err(TvError::Metric("empty trajectory".into()));
    }
    Ok(((fraction * n as f64).ceil() as usize).clamp(1, n))
}

/// Max and mean error over the trailing `window_fraction` of the samples.
pub fn compute_ate(traj: &TrajectoryRecord, window_fraction: f64) -> Result<AteStats> {
    let errors = traj.errors().ok_or(TvError::MissingReference)?;
    ate_of_errors(&errors, window_fraction)
}

pub fn ate_of_errors(errors: &[f64], window_fraction: f64) -> Result<AteStats> {
    let w = window_len(errors.len(), window_fraction)?;
    let tail = &errors[errors.len() - w..];
    Ok(AteStats {
        max: tail.iter().copied().fold(0.0, f64::max),
        mean: tail.iter().sum::<f64>() / w as f64,
        window_len: w,
    })
}

/// Mean per-step wall time over the sampling period. Step 0 (the initial
/// point) carries no computation and is skipped.
pub fn compute_tr(traj: &TrajectoryRecord, h: f64) -> Result<f64> {
    let times = traj.wall_times_ns();
    time_rate(times.get(1..).unwrap_or(&[]), h)
}

pub fn time_rate(wall_ns: &[u64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(TvError::Metric(format!(
            "sampling period must be positive, got {h}"
        )));
    }
    if wall_ns.is_empty() {
        return Ok(0.0);
    }
    let mean_s = wall_ns.iter().map(|&n| n as f64).sum::<f64>() / wall_ns.len() as f64 * 1e-9;
    Ok(mean_s / h)
}

/// Steps until the error settles inside `band_factor` times the ATE.
pub fn estimate_cr(
    traj: &TrajectoryRecord,
    window_fraction: f64,
    band_factor: f64,
) -> Result<CrEstimate> {
    if !(band_factor > 1.0) {
        return Err(TvError::Metric(format!(
            "band factor must exceed one, got {band_factor}"
        )));
    }
    let errors = traj.errors().ok_or(TvError::MissingReference)?;
    let ate = ate_of_errors(&errors, window_fraction)?;
    Ok(steps_to_band(&errors, band_factor * ate.max))
}

/// First index after which every error is at most `band`.
pub fn steps_to_band(errors: &[f64], band: f64) -> CrEstimate {
    match errors.iter().rposition(|&e| !(e <= band)) {
        None => CrEstimate {
            steps: 0,
            entered: true,
        },
        Some(last) if last + 1 == errors.len() => CrEstimate {
            steps: errors.len(),
            entered: false,
        },
        Some(last) => CrEstimate {
            steps: last + 1,
            entered: true,
        },
    }
}

pub fn compute_sg(ate_structured: f64, ate_unstructured: f64) -> Result<StructureGain> {
    if !(ate_structured > 0.0) || !(ate_unstructured > 0.0) {
        return Err(TvError::Metric(format!(
            "structure gain needs positive ATEs, got {ate_structured} and {ate_unstructured}"
        )));
    }
    Ok(StructureGain {
        sg: ate_structured / ate_unstructured,
        improvement_ratio: ate_unstructured / ate_structured,
    })
}

/// Least-squares slope of `log(ate)` against `log(h)`.
pub fn loglog_slope(h_values: &[f64], ate_values: &[f64]) -> Result<f64> {
    if h_values.len() != ate_values.len() {
        return Err(TvError::Metric("h and ATE lists differ in length".into()));
    }
    if h_values.len() < 3 {
        return Err(TvError::Metric("slope needs at least three points".into()));
    }
    if h_values
        .iter()
        .chain(ate_values)
        .any(|&v| !(v > 0.0) || !v.is_finite())
    {
        return Err(TvError::Metric("slope needs positive finite values".into()));
    }
    let n = h_values.len() as f64;
    let xs: Vec<f64> = h_values.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = ate_values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TvError::Metric("h values must be distinct".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Total variation `sum_k |x*(t_k) - x*(t_{k-1})|` of a reference path.
pub fn path_length(reference: &[Vector]) -> f64 {
    reference.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Running mean `(1/T) sum_{k=1}^T err_k` for every `T`.
pub fn mean_cumulative_error(errors: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    errors
        .iter()
        .skip(1)
        .enumerate()
        .map(|(i, e)| {
            acc += e;
            acc / (i + 1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::StepRecord;
    use proptest::prelude::*;

    fn record(errors: &[f64], wall_ns: u64) -> TrajectoryRecord {
        TrajectoryRecord {
            steps: errors
                .iter()
                .enumerate()
                .map(|(k, &e)| StepRecord {
                    k,
                    t: k as f64,
                    x: vec![e],
                    reference: Some(vec![0.0]),
                    error: Some(e),
                    wall_ns: if k == 0 { 0 } else { wall_ns },
                })
                .collect(),
        }
    }

    #[test]
    fn ate_examples() {
        let constant = record(&[0.3; 50], 0);
        let ate = compute_ate(&constant, 0.2).unwrap();
        assert_eq!(ate.max, 0.3);
        assert!((ate.mean - 0.3).abs() < 1e-15);
        assert_eq!(ate.window_len, 10);

        let decaying: Vec<f64> = (0..200).map(|k| 0.5f64.powi(k)).collect();
        assert!(compute_ate(&record(&decaying, 0), 0.2).unwrap().max <= 1e-8);

        assert!(compute_ate(&constant, 0.0).is_err());
        assert!(compute_ate(&constant, 1.5).is_err());
        let mut missing = constant.clone();
        missing.steps[3].error = None;
        assert!(matches!(
            compute_ate(&missing, 0.2),
            Err(TvError::MissingReference)
        ));
    }

    #[test]
    fn tr_examples() {
        let rec = record(&[0.0; 11], 1_000_000);
        assert!((compute_tr(&rec, 0.1).unwrap() - 0.01).abs() < 1e-15);
        let rec = record(&[0.0; 11], 100_000_000);
        assert!((compute_tr(&rec, 0.1).unwrap() - 1.0).abs() < 1e-12);
        assert!(compute_tr(&rec, 0.0).is_err());
    }

    #[test]
    fn cr_examples() {
        assert_eq!(
            steps_to_band(&[0.1, 0.05, 0.1], 0.2),
            CrEstimate {
                steps: 0,
                entered: true
            }
        );
        let geometric: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        assert_eq!(
            steps_to_band(&geometric, 0.01),
            CrEstimate {
                steps: 7,
                entered: true
            }
        );
        assert_eq!(
            steps_to_band(&[1.0, 1.0, 5.0], 2.0),
            CrEstimate {
                steps: 3,
                entered: false
            }
        );
        assert!(estimate_cr(&record(&geometric, 0), 0.2, 1.0).is_err());
    }

    #[test]
    fn cr_matches_closed_form_on_static_run() {
        let rho: f64 = 0.6;
        let e0 = 2.0;
        let errors: Vec<f64> = (0..80).map(|k| e0 * rho.powi(k)).collect();
        let tol = 1e-3;
        let cr = steps_to_band(&errors, tol).steps as f64;
        let predicted = (tol / e0).ln() / rho.ln();
        assert!((cr - predicted).abs() <= 1.0, "{cr} vs {predicted}");
    }

    #[test]
    fn sg_examples() {
        let g = compute_sg(80.0, 50.0).unwrap();
        assert!((g.sg - 1.6).abs() < 1e-15);
        assert_eq!(compute_sg(0.2, 0.2).unwrap().sg, 1.0);
        let g = compute_sg(0.001, 0.1).unwrap();
        assert!((g.sg - 0.01).abs() < 1e-15);
        assert!((g.improvement_ratio - 100.0).abs() < 1e-12);
        assert!(compute_sg(0.0, 1.0).is_err());
        assert!(compute_sg(1.0, 0.0).is_err());
    }

    #[test]
    fn slope_examples() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let lin: Vec<f64> = h.iter().map(|v| 3.0 * v).collect();
        let quad: Vec<f64> = h.iter().map(|v| 0.7 * v * v).collect();
        assert!((loglog_slope(&h, &lin).unwrap() - 1.0).abs() < 1e-12);
        assert!((loglog_slope(&h, &quad).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&h[..2], &lin[..2]).is_err());
        assert!(loglog_slope(&h, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn path_length_examples() {
        let fixed = vec![Vector::from_element(2, 1.0); 10];
        assert_eq!(path_length(&fixed), 0.0);
        let h = 0.1;
        let line: Vec<Vector> = (0..=50)
            .map(|k| Vector::from_element(1, k as f64 * h))
            .collect();
        assert!((path_length(&line) - 50.0 * h).abs() < 1e-12);
        let period = 2.0 * std::f64::consts::PI;
        let n = 10_000;
        let cosine: Vec<Vector> = (0..=n)
            .map(|k| Vector::from_element(1, (period * k as f64 / n as f64).cos()))
            .collect();
        assert!((path_length(&cosine) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn mean_cumulative() {
        assert_eq!(mean_cumulative_error(&[9.0, 1.0, 3.0]), vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn ate_monotone_under_domination(base in proptest::collection::vec(0.0f64..10.0, 5..60),
                                         bump in proptest::collection::vec(0.0f64..1.0, 60)) {
            let dominated: Vec<f64> = base.iter().zip(&bump).map(|(b, d)| b + d).collect();
            let a = ate_of_errors(&base, 0.2).unwrap();
            let b = ate_of_errors(&dominated, 0.2).unwrap();
            prop_assert!(a.max <= b.max);
            prop_assert!(a.mean <= b.mean);
        }

        #[test]
        fn sg_is_reciprocal(a in 1e-6f64..1e3, b in 1e-6f64..1e3) {
            let prod = compute_sg(a, b).unwrap().sg * compute_sg(b, a).unwrap().sg;
            prop_assert!((prod - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn slope_scale_invariant(c in 1e-3f64..1e3, p in 0.5f64..3.0) {
            let h: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
            let ate: Vec<f64> = h.iter().map(|v| v.powf(p) * (1.0 + v)).collect();
            let scaled: Vec<f64> = ate.iter().map(|v| v * c).collect();
            let s1 = loglog_slope(&h, &ate).unwrap();
            let s2 = loglog_slope(&h, &scaled).unwrap();
            prop_assert!((s1 - s2).abs() <= 1e-10);
        }
    }
}
