//! Acceptance gate: one line per criterion, then a single verdict.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvopt::benchmarks::{
    constrained_quadratic, run_robot_navigation, NavigationConfig, NavigationMode, PowerGrid,
    RobotScene, RobotTracking, SinusoidQuadratic,
};
use tvopt::continuous::{
    barrier_flow, barrier_oracle, initial_slack, integrate_flow, BarrierSchedules,
    ConstrainedProblem, FlowConfig,
};
use tvopt::correctors::{contraction_factor, CorrectorKind, CorrectorVariant};
use tvopt::discrete::{
    iterative_reference, run_prediction_correction, run_unstructured, solve_frozen, PredictorKind,
    SolverConfig, TrajectoryRecord,
};
use tvopt::metrics::{compute_ate, compute_sg, loglog_slope, mean_cumulative_error};
use tvopt::predictors::HintStream;
use tvopt::problem::{
    BoxSet, ConstraintSet, Polytope, Regularizer, TimeGrid, TimeVaryingProblem, Vector,
};

const SWEEP: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
const HORIZON: f64 = 100.0;
const WINDOW: f64 = 0.2;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sinusoid() -> SinusoidQuadratic {
    SinusoidQuadratic::new(1.0, 1.0, 1).unwrap()
}

fn grid(h: f64) -> TimeGrid {
    TimeGrid::spanning(h, HORIZON, 0.0).unwrap()
}

fn ate(rec: &TrajectoryRecord) -> f64 {
    compute_ate(rec, WINDOW).unwrap().max
}

fn running(h: f64, c: usize) -> TrajectoryRecord {
    run_unstructured(&sinusoid(), &SolverConfig::unstructured(grid(h), 0.5, c)).unwrap()
}

fn taylor(h: f64) -> TrajectoryRecord {
    let cfg = SolverConfig::prediction_correction(
        grid(h),
        0.5,
        PredictorKind::Taylor { exact_solve: true },
        1,
        1,
    );
    run_prediction_correction(&sinusoid(), &cfg).unwrap()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn first_order_law() -> Outcome {
    let started = Instant::now();
    let ates: Vec<f64> = SWEEP.iter().map(|&h| ate(&running(h, 1))).collect();
    let slope = loglog_slope(&SWEEP, &ates).unwrap();
    let elapsed = started.elapsed();
    outcome(
        (0.8..=1.2).contains(&slope) && elapsed < Duration::from_secs(10),
        format!(
            "slope {slope:.3} over ATE [{}] in {elapsed:.2?}",
            fmt_list(&ates)
        ),
    )
}

fn second_order_law() -> Outcome {
    let started = Instant::now();
    let structured: Vec<f64> = SWEEP.iter().map(|&h| ate(&taylor(h))).collect();
    let slope = loglog_slope(&SWEEP, &structured).unwrap();
    let elapsed = started.elapsed();
    let mut pass = (1.7..=2.3).contains(&slope) && elapsed < Duration::from_secs(30);
    let mut ratios = Vec::new();
    for c in [1usize, 2] {
        let baseline: Vec<f64> = SWEEP.iter().map(|&h| ate(&running(h, c))).collect();
        let r: Vec<f64> = structured
            .iter()
            .zip(&baseline)
            .map(|(s, u)| compute_sg(*s, *u).unwrap().improvement_ratio)
            .collect();
        pass &= r.iter().all(|v| *v > 1.0) && r.windows(2).all(|w| w[1] > w[0]);
        ratios.push(format!("C'={c}: [{}]", fmt_list(&r)));
    }
    outcome(
        pass,
        format!(
            "slope {slope:.3}, improvement {} in {elapsed:.2?}",
            ratios.join("; ")
        ),
    )
}

fn per_step_inequality() -> Outcome {
    let rho = contraction_factor(&sinusoid().profile(), 0.5);
    let mut worst = f64::NEG_INFINITY;
    for &h in &SWEEP {
        let k = sinusoid().max_time_gradient() * h;
        let errs = running(h, 1).errors().unwrap();
        for w in errs.windows(2) {
            worst = worst.max(w[1] - rho * (w[0] + k));
        }
    }
    outcome(worst <= 1e-9, format!("max excess over bound {worst:.3e}"))
}

fn static_consistency() -> Outcome {
    let f = SinusoidQuadratic::new(0.0, 1.0, 3).unwrap();
    let g = TimeGrid::new(0.1, 5000, 0.0).unwrap();
    let plain = ate(&run_unstructured(&f, &SolverConfig::unstructured(g, 0.5, 1)).unwrap());
    let cfg = SolverConfig::prediction_correction(
        g,
        0.5,
        PredictorKind::Taylor { exact_solve: true },
        1,
        1,
    );
    let pc = ate(&run_prediction_correction(&f, &cfg).unwrap());
    outcome(
        plain <= 1e-8 && pc <= 1e-8,
        format!("unstructured {plain:.3e}, prediction-correction {pc:.3e}"),
    )
}

fn contraction_on<P: TimeVaryingProblem>(
    oracle: &P,
    alpha: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let rho = contraction_factor(&oracle.profile(), alpha);
    let kind = CorrectorKind::new(CorrectorVariant::ProximalGradient, alpha).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.random_range(0.0..50.0);
        let start = Vector::from_fn(oracle.dim(), |_, _| rng.random_range(-scale..scale));
        let opt = solve_frozen(oracle, t, &start, 1e-11).unwrap();
        let mut x = start;
        for _ in 0..5 {
            let before = (&x - &opt).norm();
            x = kind.step(oracle, &x, t).unwrap();
            if before > 1e-6 {
                worst = worst.max((&x - &opt).norm() / before - rho);
            }
        }
    }
    (worst, rho)
}

fn q_linear_contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid_problem = PowerGrid::desk_scale(60.0, 1).unwrap();
    let cases = [
        (
            "sinusoid",
            contraction_on(
                &SinusoidQuadratic::new(1.0, 1.0, 3).unwrap(),
                0.5,
                5.0,
                &mut rng,
            ),
        ),
        (
            "tracking",
            contraction_on(
                &RobotTracking::new(1.0, 2.0, 1.0).unwrap(),
                0.2,
                5.0,
                &mut rng,
            ),
        ),
        (
            "power_grid",
            contraction_on(&grid_problem, 1.0 / 210.0, 80.0, &mut rng),
        ),
    ];
    let pass = cases.iter().all(|(_, (excess, _))| *excess <= 1e-9);
    let detail = cases
        .iter()
        .map(|(name, (excess, rho))| format!("{name}: rho {rho:.5}, excess {excess:.2e}"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn continuous_tracking() -> Outcome {
    let started = Instant::now();
    let cfg = FlowConfig::new(1.0, (0.0, 10.0), 1e-3, Vector::from_element(1, 2.0)).unwrap();
    let traj = integrate_flow(&sinusoid(), &cfg).unwrap();
    let elapsed = started.elapsed();
    let e0 = traj.record.steps[0].error.unwrap();
    let excess = traj
        .record
        .steps
        .iter()
        .map(|s| s.error.unwrap() - e0 * (-s.t).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    let rise = traj
        .lyapunov
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        excess <= 1e-5 && rise <= 1e-6 && elapsed < Duration::from_secs(5),
        format!(
            "max error over envelope {excess:.2e}, max Lyapunov rise {rise:.2e}, {elapsed:.2?}"
        ),
    )
}

fn barrier_convergence() -> Outcome {
    let problem = constrained_quadratic(2.0, 1.0).unwrap();
    let x0 = Vector::from_element(1, 0.0);
    let s0 = initial_slack(&problem, &x0, 0.0, 1.0).unwrap();
    let sched = BarrierSchedules::generic(s0).unwrap();
    let t_end = sched.time_to_reach(1e3);
    let cfg = FlowConfig::new(1.0, (0.0, t_end), 1e-3, x0)
        .unwrap()
        .with_record_every(100);
    let traj = barrier_flow(&problem, sched, &cfg).unwrap();
    let last = traj.record.steps.last().unwrap();
    let gap = (last.x[0] - 1.0).abs();
    let margin = traj.min_margin.unwrap();
    outcome(
        gap <= 0.02 && margin > 0.0 && sched.c(last.t) >= 1e3 * (1.0 - 1e-9),
        format!(
            "|x(T) - 1| = {gap:.2e} at c(T) = {:.1}, min margin {margin:.2e}",
            sched.c(last.t)
        ),
    )
}

fn robot_navigation() -> Outcome {
    let started = Instant::now();
    let scene = RobotScene::shipped();
    let cfg = NavigationConfig::default();
    let structured = run_robot_navigation(&scene, NavigationMode::StructuredBarrier, &cfg);
    let plain = run_robot_navigation(&scene, NavigationMode::UnstructuredBarrier, &cfg);
    let elapsed = started.elapsed();
    match (structured, plain) {
        (Ok(s), Ok(u)) => {
            let a = tvopt::metrics::ate_of_errors(&s.errors, WINDOW)
                .unwrap()
                .max;
            let b = tvopt::metrics::ate_of_errors(&u.errors, WINDOW)
                .unwrap()
                .max;
            outcome(
                s.min_clearance > 0.0 && u.min_clearance > 0.0 && a < b && elapsed < Duration::from_secs(60),
                format!(
                    "clearance {:.3e} / {:.3e}, trailing error structured {a:.3} vs unstructured {b:.3}, {elapsed:.2?}",
                    s.min_clearance, u.min_clearance
                ),
            )
        }
        (s, u) => outcome(false, format!("run failed: {:?} / {:?}", s.err(), u.err())),
    }
}

fn power_grid() -> Outcome {
    let horizon = 1800.0;
    let problem = PowerGrid::desk_scale(horizon, 42).unwrap();
    let g = TimeGrid::spanning(1.0, horizon, 0.0).unwrap();
    let alpha = 1.0 / (10.0 * problem.profile().l);
    let refs = iterative_reference(&problem, &g, 1e-10).unwrap();
    let run = |cfg: SolverConfig| {
        let mut rec = run_prediction_correction(&problem, &cfg).unwrap();
        rec.attach_reference(&refs).unwrap();
        rec
    };
    let structured = run(SolverConfig::prediction_correction(
        g,
        alpha,
        PredictorKind::Taylor { exact_solve: false },
        3,
        1,
    ));
    let plain = run(SolverConfig::unstructured(g, alpha, 3));
    let s = *mean_cumulative_error(&structured.errors().unwrap())
        .last()
        .unwrap();
    let u = *mean_cumulative_error(&plain.errors().unwrap())
        .last()
        .unwrap();
    let gain = compute_sg(ate(&structured), ate(&plain)).unwrap();
    let active = refs
        .iter()
        .filter(|r| r.iter().any(|v| (v.abs() - 50.0).abs() < 1e-9))
        .count();
    outcome(
        s <= u,
        format!(
            "mean cumulative error (3,1) {s:.4} vs (0,3) {u:.4}; SG {:.4}, improvement {:.4}; boxes active at {active} samples",
            gain.sg, gain.improvement_ratio
        ),
    )
}

fn reductions() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let g = TimeGrid::new(0.1, 400, 0.0).unwrap();
    let tracking = RobotTracking::new(1.0, 2.0, 0.8).unwrap();
    let a = run_unstructured(&tracking, &SolverConfig::unstructured(g, 0.2, 2)).unwrap();
    let hinted =
        SolverConfig::prediction_correction(g, 0.2, PredictorKind::Hint(HintStream::Zero), 3, 2);
    let b = run_prediction_correction(&tracking, &hinted).unwrap();
    let same = a.decisions() == b.decisions();
    pass &= same;
    notes.push(format!("zero hints bitwise {same}"));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sets = [
        ConstraintSet::Box(BoxSet::uniform(3, -1.0, 0.5).unwrap()),
        ConstraintSet::Ball {
            center: Vector::from_row_slice(&[0.2, -0.1, 0.3]),
            radius: 0.7,
        },
        ConstraintSet::Polytope(
            Polytope::new(
                vec![
                    Vector::from_row_slice(&[1.0, 1.0, 0.0]),
                    Vector::from_row_slice(&[0.0, -1.0, 2.0]),
                ],
                vec![0.5, 1.0],
                Some(BoxSet::uniform(3, -2.0, 2.0).unwrap()),
            )
            .unwrap(),
        ),
    ];
    let mut prox_ok = true;
    for set in &sets {
        let g = Regularizer::Indicator(set.clone());
        for _ in 0..100 {
            let x = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            prox_ok &= g.prox(0.37, &x).unwrap() == set.project(&x).unwrap();
        }
    }
    pass &= prox_ok;
    notes.push(format!("prox of indicator equals projection {prox_ok}"));

    let f = SinusoidQuadratic::new(1.0, 1.0, 2).unwrap();
    let cfg = FlowConfig::new(1.0, (0.0, 3.0), 1e-2, Vector::from_row_slice(&[2.0, -1.0])).unwrap();
    let plain = integrate_flow(&f, &cfg).unwrap();
    let free = ConstrainedProblem::new(f, Vec::new());
    let barrier = barrier_flow(&free, BarrierSchedules::generic(1.0).unwrap(), &cfg).unwrap();
    let same = plain.record.decisions() == barrier.record.decisions()
        && plain.record.errors() == barrier.record.errors();
    pass &= same;
    notes.push(format!("unconstrained barrier flow identical {same}"));
    outcome(pass, notes.join("; "))
}

fn rel_close(a: &Vector, b: &Vector) -> bool {
    (a - b).norm() <= 1e-6 * b.norm().max(1.0)
}

/// Central differences of value, gradient and (when present) the time
/// derivative of the gradient, at `probes` random points.
fn hygiene_on<P: TimeVaryingProblem>(
    oracle: &P,
    scale: f64,
    rng: &mut ChaCha8Rng,
    interior: impl Fn(&Vector, f64) -> bool,
) -> (usize, usize) {
    let n = oracle.dim();
    let (mut checked, mut bad) = (0, 0);
    while checked < 100 {
        let x = Vector::from_fn(n, |_, _| rng.random_range(-scale..scale));
        let t = rng.random_range(0.5..20.0);
        if !interior(&x, t) {
            continue;
        }
        checked += 1;
        let e = 1e-5 * (1.0 + x.amax());
        let g = oracle.gradient(&x, t);
        let h = oracle.hessian(&x, t);
        let mut fd_g = Vector::zeros(n);
        let mut ok = true;
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += e;
            xm[j] -= e;
            fd_g[j] = (oracle.value(&xp, t) - oracle.value(&xm, t)) / (2.0 * e);
            let col = (oracle.gradient(&xp, t) - oracle.gradient(&xm, t)) / (2.0 * e);
            ok &= rel_close(&col, &h.column(j).into_owned());
        }
        ok &= rel_close(&fd_g, &g);
        if let Some(tg) = oracle.time_gradient(&x, t) {
            let et = 1e-5 * (1.0 + t);
            let fd_t = (oracle.gradient(&x, t + et) - oracle.gradient(&x, t - et)) / (2.0 * et);
            ok &= rel_close(&fd_t, &tg);
        }
        bad += usize::from(!ok);
    }
    (checked, bad)
}

fn rk4_error(dt: f64) -> f64 {
    let cfg = FlowConfig::new(1.0, (0.0, 2.0), dt, Vector::from_element(1, 2.0)).unwrap();
    let traj = integrate_flow(&sinusoid(), &cfg).unwrap();
    let last = traj.record.steps.last().unwrap();
    (last.x[0] - (last.t.cos() + (-last.t).exp())).abs()
}

fn numerical_hygiene() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let always = |_: &Vector, _: f64| true;
    let constrained = constrained_quadratic(2.0, 1.0).unwrap();
    let sched = BarrierSchedules::new(2.0, 0.1, 1.0, 0.05).unwrap();
    let barrier = barrier_oracle(&constrained, sched);
    let results = [
        (
            "sinusoid",
            hygiene_on(
                &SinusoidQuadratic::new(1.3, 2.0, 3).unwrap(),
                3.0,
                &mut rng,
                always,
            ),
        ),
        (
            "tracking",
            hygiene_on(
                &RobotTracking::new(1.0, 2.0, 0.7).unwrap(),
                3.0,
                &mut rng,
                always,
            ),
        ),
        (
            "power_grid",
            hygiene_on(
                &PowerGrid::desk_scale(30.0, 3).unwrap(),
                40.0,
                &mut rng,
                always,
            ),
        ),
        (
            "barrier",
            hygiene_on(&barrier, 3.0, &mut rng, |x, t| {
                barrier
                    .slacks(x, t)
                    .map(|u| u.iter().all(|v| *v > 0.05))
                    .unwrap_or(false)
            }),
        ),
    ];
    let ratio = rk4_error(0.2) / rk4_error(0.1);
    let pass = results.iter().all(|(_, (_, bad))| *bad == 0) && (12.0..=20.0).contains(&ratio);
    let detail = results
        .iter()
        .map(|(name, (n, bad))| format!("{name} {bad}/{n} mismatches"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("{detail}; RK4 ratio {ratio:.2}"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Check); 11] = [
        ("1 first-order tracking law", first_order_law),
        ("2 second-order tracking law", second_order_law),
        ("3 per-step contraction inequality", per_step_inequality),
        ("4 static consistency", static_consistency),
        ("5 Q-linear corrector contraction", q_linear_contraction),
        ("6 continuous exponential tracking", continuous_tracking),
        ("7 barrier feasibility and convergence", barrier_convergence),
        ("8 robot navigation safety and ordering", robot_navigation),
        ("9 power grid ordering", power_grid),
        ("10 reductions", reductions),
        ("11 numerical hygiene", numerical_hygiene),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let result = check();
        println!(
            "[{}] {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
        if !result.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
