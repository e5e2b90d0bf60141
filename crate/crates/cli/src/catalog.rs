pub const PROBLEMS: &[(&str, &str)] = &[
    (
        "sinusoid_quadratic",
        "0.5|x - A cos(wt) 1|^2, closed-form optimizer",
    ),
    (
        "power_grid",
        "DER setpoint tracking with box limits on synthetic feeder signals",
    ),
    (
        "robot_nav",
        "8-obstacle planar navigation toward an orbiting goal",
    ),
    (
        "robot_tracking",
        "|x - b(t)|^2 + lambda |x|_1 toward a moving target",
    ),
    (
        "constrained_quadratic",
        "0.5(x - target)^2 subject to x <= bound",
    ),
];

pub const SOLVERS: &[(&str, &str)] = &[
    ("unstructured", "C proximal-gradient passes per sample"),
    (
        "prediction_correction",
        "P prediction passes then C correction passes",
    ),
    (
        "flow",
        "prediction-correction flow integrated with RK4 or Euler",
    ),
    (
        "barrier_flow",
        "log-barrier flow for inequality-constrained problems",
    ),
    ("robot_nav", "joint robot and goal-estimate barrier flow"),
];

pub const PREDICTORS: &[(&str, &str)] = &[
    (
        "taylor_exact",
        "Taylor model solved exactly (smooth problems)",
    ),
    ("taylor", "P proximal-gradient passes on the Taylor model"),
    ("kalman", "Kalman forecast of the cost parameter"),
    ("hint_zero", "zero hint, reduces to the unstructured method"),
    ("hint_current", "current gradient as the hint"),
    ("hint_next", "next gradient as the hint (looks ahead)"),
    ("clairvoyant", "exact optimizer increment (looks ahead)"),
];

pub const METRICS: &[(&str, &str)] = &[
    ("ate_max", "maximum error over the trailing window"),
    ("ate_mean", "mean error over the trailing window"),
    ("tr", "mean wall time per step over the sampling period"),
    (
        "cr_steps",
        "steps until the error stays inside the ATE band",
    ),
    ("path_length", "length of the reference trajectory"),
    ("sg", "structured over unstructured ATE (sweeps)"),
    (
        "improvement_ratio",
        "unstructured over structured ATE (sweeps)",
    ),
    ("slope", "log-log slope of ATE against h (sweeps)"),
];

pub fn render() -> String {
    let mut out = String::new();
    for (title, rows) in [
        ("problems", PROBLEMS),
        ("solvers", SOLVERS),
        ("predictors", PREDICTORS),
        ("metrics", METRICS),
    ] {
        out.push_str(title);
        out.push_str(":\n");
        for (id, text) in rows {
            out.push_str(&format!("  {id:<24}{text}\n"));
        }
    }
    out
}
