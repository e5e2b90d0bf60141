//! Single runs and step-size sweeps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use tvopt::benchmarks::{
    constrained_quadratic, run_robot_navigation, NavigationConfig, NavigationMode, PowerGrid,
    RobotScene, RobotTracking, SinusoidQuadratic,
};
use tvopt::discrete::solve_frozen;
use tvopt::metrics::{compute_sg, loglog_slope, DEFAULT_BAND_FACTOR};
use tvopt::{
    barrier_flow, initial_slack, integrate_flow, run_prediction_correction, run_unstructured,
    BarrierSchedules, FlowConfig, HintStream, MetricsReport, PredictorKind, SolverConfig, TimeGrid,
    TimeVaryingProblem, TrajectoryRecord, TvError, Vector,
};

use crate::config::{ExperimentConfig, NavModeSpec, PredictorSpec, ProblemSpec, SolverSpec};
use crate::error::CliError;
use crate::output::{write_atomic, write_csv, write_json};

/// Tolerance of the frozen solves that supply ground truth when a problem
/// has no closed-form optimizer.
const REFERENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub problem: String,
    pub solver: String,
    pub h: f64,
    pub steps: usize,
    pub seed: u64,
    pub window: f64,
    pub ate_max: f64,
    pub ate_mean: f64,
    pub tr: f64,
    pub cr_steps: usize,
    pub cr_entered: bool,
    pub path_length: Option<f64>,
    pub passes_per_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pair {
    pub h: f64,
    pub structured: String,
    pub unstructured: String,
    pub sg: f64,
    pub improvement_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub solver: String,
    pub h: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub problem: String,
    pub runs: Vec<Summary>,
    /// `null` when fewer than three runs of a solver succeeded.
    pub slopes: BTreeMap<String, Option<f64>>,
    pub pairs: Vec<Pair>,
    pub failures: Vec<Failure>,
}

/// A finished or diverged run.
struct RunResult {
    record: TrajectoryRecord,
    sample_period: f64,
    passes: Option<usize>,
}

/// Paths written by one run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(Summary, Artifacts), CliError> {
    let h = cfg
        .grid
        .h
        .ok_or_else(|| CliError::Config("run needs grid.h".into()))?;
    let stem = out_dir.join(cfg.base_name());
    run_and_write(cfg, &cfg.solver, h, &stem)
}

pub fn sweep_h(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(SweepReport, PathBuf), CliError> {
    let hs = cfg
        .grid
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs grid.sweep".into()))?;
    if hs.len() < 3 {
        return Err(CliError::Config(format!(
            "sweep needs at least 3 step sizes, got {}",
            hs.len()
        )));
    }
    let baseline = matched_baseline(cfg, hs[0])?;
    let mut solvers = vec![cfg.solver.clone()];
    solvers.extend(baseline.clone());
    let jobs: Vec<(usize, f64, &SolverSpec)> = solvers
        .iter()
        .flat_map(|s| hs.iter().enumerate().map(move |(i, h)| (i, *h, s)))
        .collect();
    let dir = out_dir.join(cfg.base_name());
    let results: Vec<(f64, String, Result<Summary, CliError>)> = jobs
        .par_iter()
        .map(|&(i, h, solver)| {
            let stem = dir.join(format!("h{i}-{}", solver.label()));
            (
                h,
                solver.label(),
                run_and_write(cfg, solver, h, &stem).map(|(s, _)| s),
            )
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (h, solver, result) in results {
        match result {
            Ok(s) => runs.push(s),
            Err(e) => failures.push(Failure {
                solver,
                h,
                error: e.to_string(),
            }),
        }
    }
    let mut slopes = BTreeMap::new();
    for solver in &solvers {
        let label = solver.label();
        let (h, ate): (Vec<f64>, Vec<f64>) = runs
            .iter()
            .filter(|r| r.solver == label)
            .map(|r| (r.h, r.ate_max))
            .unzip();
        slopes.insert(label, loglog_slope(&h, &ate).ok());
    }
    let mut pairs = Vec::new();
    if let Some(base) = &baseline {
        let (s_label, u_label) = (cfg.solver.label(), base.label());
        for &h in &hs {
            let find = |label: &str| runs.iter().find(|r| r.solver == label && r.h == h);
            if let (Some(s), Some(u)) = (find(&s_label), find(&u_label)) {
                if let Ok(gain) = compute_sg(s.ate_max, u.ate_max) {
                    pairs.push(Pair {
                        h,
                        structured: s_label.clone(),
                        unstructured: u_label.clone(),
                        sg: gain.sg,
                        improvement_ratio: gain.improvement_ratio,
                    });
                }
            }
        }
    }
    let report = SweepReport {
        problem: cfg.problem.id().into(),
        runs,
        slopes,
        pairs,
        failures,
    };
    let path = dir.join("sweep.json");
    write_atomic(&path, |w| write_json(w, &report))?;
    if !report.failures.is_empty() {
        return Err(CliError::SweepFailures(report.failures.len(), jobs.len()));
    }
    Ok((report, path))
}

/// Correction-only run spending the same number of gradient-type passes per
/// step as a prediction-correction solver.
fn matched_baseline(cfg: &ExperimentConfig, h: f64) -> Result<Option<SolverSpec>, CliError> {
    let SolverSpec::PredictionCorrection { alpha, x0, .. } = &cfg.solver else {
        return Ok(None);
    };
    let grid = TimeGrid::new(h, 1, cfg.grid.t0)?;
    let passes = discrete_config(cfg, &cfg.solver, grid, 1.0)?.passes_per_step();
    Ok(Some(SolverSpec::Unstructured {
        alpha: *alpha,
        correction_steps: passes,
        x0: x0.clone(),
    }))
}

fn run_and_write(
    cfg: &ExperimentConfig,
    solver: &SolverSpec,
    h: f64,
    stem: &Path,
) -> Result<(Summary, Artifacts), CliError> {
    let artifacts = Artifacts {
        csv: stem.with_extension("csv"),
        json: stem.with_extension("json"),
    };
    let run = match execute(cfg, solver, h) {
        Ok(run) => run,
        Err(TvError::Diverged { step, partial }) => {
            write_atomic(&artifacts.csv, |w| write_csv(w, &partial))?;
            return Err(TvError::Diverged { step, partial }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_atomic(&artifacts.csv, |w| write_csv(w, &run.record))?;
    let metrics = MetricsReport::from_trajectory(
        &run.record,
        run.sample_period,
        cfg.window,
        DEFAULT_BAND_FACTOR,
    )?;
    let summary = Summary {
        problem: cfg.problem.id().into(),
        solver: solver.label(),
        h,
        steps: run.record.len().saturating_sub(1),
        seed: cfg.seed,
        window: cfg.window,
        ate_max: metrics.ate,
        ate_mean: metrics.ate_mean,
        tr: metrics.tr,
        cr_steps: metrics.cr_steps,
        cr_entered: metrics.cr_entered,
        path_length: metrics.path_length,
        passes_per_step: run.passes,
    };
    write_atomic(&artifacts.json, |w| write_json(w, &summary))?;
    Ok((summary, artifacts))
}

fn execute(cfg: &ExperimentConfig, solver: &SolverSpec, h: f64) -> tvopt::Result<RunResult> {
    let duration = cfg.grid.duration_for(h);
    match &cfg.problem {
        ProblemSpec::SinusoidQuadratic {
            omega,
            amplitude,
            dim,
        } => smooth_run(
            cfg,
            solver,
            h,
            &SinusoidQuadratic::new(*omega, *amplitude, *dim)?,
        ),
        ProblemSpec::RobotTracking {
            lambda,
            amplitude,
            omega,
        } => smooth_run(
            cfg,
            solver,
            h,
            &RobotTracking::new(*lambda, *amplitude, *omega)?,
        ),
        ProblemSpec::PowerGrid => {
            let problem = PowerGrid::desk_scale(cfg.grid.t0 + duration + 2.0 * h, cfg.seed)?;
            smooth_run(cfg, solver, h, &problem)
        }
        ProblemSpec::ConstrainedQuadratic { target, bound } => {
            let SolverSpec::BarrierFlow {
                kappa,
                c0,
                c_rate,
                gamma,
                margin,
                integrator,
                x0,
            } = solver
            else {
                return Err(unsupported(cfg, solver));
            };
            let problem = constrained_quadratic(*target, *bound)?;
            let x0 = initial_point(x0, 1)?;
            let s0 = initial_slack(&problem, &x0, cfg.grid.t0, *margin)?;
            let schedules = BarrierSchedules::new(*c0, *c_rate, s0, *gamma)?;
            let flow = FlowConfig::new(*kappa, (cfg.grid.t0, cfg.grid.t0 + duration), h, x0)?
                .with_integrator(*integrator)
                .with_record_every(cfg.grid.record_every);
            let traj = barrier_flow(&problem, schedules, &flow)?;
            Ok(RunResult {
                record: traj.record,
                sample_period: h * cfg.grid.record_every as f64,
                passes: None,
            })
        }
        ProblemSpec::RobotNav => {
            let SolverSpec::RobotNav {
                mode,
                kappa,
                c0,
                c_rate,
                integrator,
            } = solver
            else {
                return Err(unsupported(cfg, solver));
            };
            let nav = NavigationConfig {
                kappa: *kappa,
                c0: *c0,
                c_rate: *c_rate,
                t_end: duration,
                dt: h,
                integrator: *integrator,
                record_every: cfg.grid.record_every,
            };
            let mode = match mode {
                NavModeSpec::Structured => NavigationMode::StructuredBarrier,
                NavModeSpec::Unstructured => NavigationMode::UnstructuredBarrier,
            };
            let run = run_robot_navigation(&RobotScene::shipped(), mode, &nav)?;
            Ok(RunResult {
                record: run.flow.record,
                sample_period: h * cfg.grid.record_every as f64,
                passes: None,
            })
        }
    }
}

fn unsupported(cfg: &ExperimentConfig, solver: &SolverSpec) -> TvError {
    TvError::InvalidConfig(format!(
        "solver {} does not apply to problem {}",
        solver.id(),
        cfg.problem.id()
    ))
}

fn initial_point(x0: &Option<Vec<f64>>, dim: usize) -> tvopt::Result<Vector> {
    match x0 {
        None => Ok(Vector::zeros(dim)),
        Some(v) if v.len() == dim => Ok(Vector::from_row_slice(v)),
        Some(v) => Err(TvError::DimensionMismatch {
            expected: dim,
            got: v.len(),
        }),
    }
}

fn smooth_run<P: TimeVaryingProblem>(
    cfg: &ExperimentConfig,
    solver: &SolverSpec,
    h: f64,
    problem: &P,
) -> tvopt::Result<RunResult> {
    let mut result = match solver {
        SolverSpec::Unstructured { .. } | SolverSpec::PredictionCorrection { .. } => {
            let grid = TimeGrid::new(h, cfg.grid.steps_for(h), cfg.grid.t0)?;
            let sc = discrete_config(cfg, solver, grid, problem.profile().default_step())?;
            let record = if sc.predictor.is_none() {
                run_unstructured(problem, &sc)
            } else {
                run_prediction_correction(problem, &sc)
            };
            RunResult {
                record: record?,
                sample_period: h,
                passes: Some(sc.passes_per_step()),
            }
        }
        SolverSpec::Flow {
            kappa,
            integrator,
            x0,
        } => {
            let x0 = initial_point(x0, problem.dim())?;
            let flow = FlowConfig::new(
                *kappa,
                (cfg.grid.t0, cfg.grid.t0 + cfg.grid.duration_for(h)),
                h,
                x0,
            )?
            .with_integrator(*integrator)
            .with_record_every(cfg.grid.record_every);
            RunResult {
                record: integrate_flow(problem, &flow)?.record,
                sample_period: h * cfg.grid.record_every as f64,
                passes: None,
            }
        }
        _ => return Err(unsupported(cfg, solver)),
    };
    if !result.record.has_reference() {
        attach_frozen_reference(problem, &mut result.record)?;
    }
    Ok(result)
}

/// Warm-started frozen solves at every recorded time.
fn attach_frozen_reference<P: TimeVaryingProblem>(
    problem: &P,
    record: &mut TrajectoryRecord,
) -> tvopt::Result<()> {
    let mut x = Vector::zeros(problem.dim());
    let mut refs = Vec::with_capacity(record.len());
    for step in &record.steps {
        x = solve_frozen(problem, step.t, &x, REFERENCE_TOLERANCE)?;
        refs.push(x.clone());
    }
    record.attach_reference(&refs)
}

fn discrete_config(
    cfg: &ExperimentConfig,
    solver: &SolverSpec,
    grid: TimeGrid,
    default_alpha: f64,
) -> tvopt::Result<SolverConfig> {
    let with_x0 = |sc: SolverConfig, x0: &Option<Vec<f64>>| match x0 {
        Some(v) => sc.with_x0(Vector::from_row_slice(v)),
        None => sc,
    };
    match solver {
        SolverSpec::Unstructured {
            alpha,
            correction_steps,
            x0,
        } => Ok(with_x0(
            SolverConfig::unstructured(grid, alpha.unwrap_or(default_alpha), *correction_steps),
            x0,
        )),
        SolverSpec::PredictionCorrection {
            alpha,
            predictor,
            prediction_steps,
            correction_steps,
            x0,
            process_noise,
            observation_noise,
        } => {
            let kind =
                match predictor {
                    PredictorSpec::TaylorExact => PredictorKind::Taylor { exact_solve: true },
                    PredictorSpec::Taylor => PredictorKind::Taylor { exact_solve: false },
                    PredictorSpec::HintZero => PredictorKind::Hint(HintStream::Zero),
                    PredictorSpec::HintCurrent => PredictorKind::Hint(HintStream::CurrentGradient),
                    PredictorSpec::HintNext => PredictorKind::Hint(HintStream::NextGradient),
                    PredictorSpec::Clairvoyant => PredictorKind::Clairvoyant,
                    PredictorSpec::Kalman => {
                        let ProblemSpec::SinusoidQuadratic {
                            omega,
                            amplitude,
                            dim,
                        } = cfg.problem
                        else {
                            return Err(TvError::InvalidConfig(
                                "kalman needs sinusoid_quadratic".into(),
                            ));
                        };
                        let model = SinusoidQuadratic::new(omega, amplitude, dim)?
                            .oscillator_model(grid.h, *process_noise, *observation_noise, None)?;
                        PredictorKind::Kalman(model)
                    }
                };
            Ok(with_x0(
                SolverConfig::prediction_correction(
                    grid,
                    alpha.unwrap_or(default_alpha),
                    kind,
                    *prediction_steps,
                    *correction_steps,
                ),
                x0,
            ))
        }
        _ => Err(TvError::InvalidConfig(format!(
            "{} is not a discrete solver",
            solver.id()
        ))),
    }
}
