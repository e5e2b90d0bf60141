//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tvopt::metrics::DEFAULT_WINDOW_FRACTION;
use tvopt::Integrator;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Basename for written artifacts; derived from the ids when absent.
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window: f64,
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_FRACTION
}

fn one() -> f64 {
    1.0
}

fn one_step() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    SinusoidQuadratic {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one_step")]
        dim: usize,
    },
    PowerGrid,
    RobotNav,
    RobotTracking {
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        omega: f64,
    },
    ConstrainedQuadratic {
        #[serde(default = "default_target")]
        target: f64,
        #[serde(default = "one")]
        bound: f64,
    },
}

fn default_target() -> f64 {
    2.0
}

impl ProblemSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ProblemSpec::SinusoidQuadratic { .. } => "sinusoid_quadratic",
            ProblemSpec::PowerGrid => "power_grid",
            ProblemSpec::RobotNav => "robot_nav",
            ProblemSpec::RobotTracking { .. } => "robot_tracking",
            ProblemSpec::ConstrainedQuadratic { .. } => "constrained_quadratic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorSpec {
    TaylorExact,
    Taylor,
    Kalman,
    HintZero,
    HintCurrent,
    HintNext,
    Clairvoyant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavModeSpec {
    Structured,
    Unstructured,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Unstructured {
        /// Defaults to `1/L`.
        alpha: Option<f64>,
        #[serde(default = "one_step")]
        correction_steps: usize,
        x0: Option<Vec<f64>>,
    },
    PredictionCorrection {
        alpha: Option<f64>,
        predictor: PredictorSpec,
        #[serde(default = "one_step")]
        prediction_steps: usize,
        #[serde(default = "one_step")]
        correction_steps: usize,
        x0: Option<Vec<f64>>,
        #[serde(default = "default_process_noise")]
        process_noise: f64,
        #[serde(default = "default_observation_noise")]
        observation_noise: f64,
    },
    Flow {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default)]
        integrator: Integrator,
        x0: Option<Vec<f64>>,
    },
    BarrierFlow {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "one")]
        c0: f64,
        #[serde(default = "default_c_rate")]
        c_rate: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        /// Initial slack margin above the worst constraint value at `x0`.
        #[serde(default = "one")]
        margin: f64,
        #[serde(default)]
        integrator: Integrator,
        x0: Option<Vec<f64>>,
    },
    RobotNav {
        mode: NavModeSpec,
        #[serde(default = "default_nav_kappa")]
        kappa: f64,
        #[serde(default = "one")]
        c0: f64,
        #[serde(default = "default_nav_rate")]
        c_rate: f64,
        #[serde(default)]
        integrator: Integrator,
    },
}

fn default_process_noise() -> f64 {
    1e-6
}

fn default_observation_noise() -> f64 {
    1e-4
}

fn default_c_rate() -> f64 {
    0.5
}

fn default_gamma() -> f64 {
    0.5
}

fn default_nav_kappa() -> f64 {
    0.1
}

fn default_nav_rate() -> f64 {
    0.1
}

impl SolverSpec {
    pub fn id(&self) -> &'static str {
        match self {
            SolverSpec::Unstructured { .. } => "unstructured",
            SolverSpec::PredictionCorrection { .. } => "prediction_correction",
            SolverSpec::Flow { .. } => "flow",
            SolverSpec::BarrierFlow { .. } => "barrier_flow",
            SolverSpec::RobotNav { .. } => "robot_nav",
        }
    }

    /// Label distinguishing runs in a sweep report.
    pub fn label(&self) -> String {
        match self {
            SolverSpec::Unstructured {
                correction_steps, ..
            } => format!("unstructured_c{correction_steps}"),
            SolverSpec::PredictionCorrection {
                predictor,
                prediction_steps,
                correction_steps,
                ..
            } => {
                let p = match predictor {
                    PredictorSpec::TaylorExact => "taylor_exact",
                    PredictorSpec::Taylor => "taylor",
                    PredictorSpec::Kalman => "kalman",
                    PredictorSpec::HintZero => "hint_zero",
                    PredictorSpec::HintCurrent => "hint_current",
                    PredictorSpec::HintNext => "hint_next",
                    PredictorSpec::Clairvoyant => "clairvoyant",
                };
                format!("{p}_p{prediction_steps}_c{correction_steps}")
            }
            SolverSpec::RobotNav { mode, .. } => match mode {
                NavModeSpec::Structured => "robot_nav_structured".into(),
                NavModeSpec::Unstructured => "robot_nav_unstructured".into(),
            },
            other => other.id().into(),
        }
    }
}

/// Sampling grid. For flows `h` is the integration step.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: Option<f64>,
    /// Number of steps after the initial sample.
    pub steps: Option<usize>,
    /// Horizon in seconds; alternative to `steps`.
    pub duration: Option<f64>,
    #[serde(default)]
    pub t0: f64,
    /// Step sizes visited by `sweep`.
    pub sweep: Option<Vec<f64>>,
    /// Flows only: keep every n-th integration step.
    #[serde(default = "one_step")]
    pub record_every: usize,
}

impl GridSpec {
    pub fn steps_for(&self, h: f64) -> usize {
        match (self.steps, self.duration) {
            (Some(k), _) => k,
            (None, Some(d)) => (d / h).round() as usize,
            (None, None) => 0,
        }
    }

    pub fn duration_for(&self, h: f64) -> f64 {
        self.duration.unwrap_or(self.steps_for(h) as f64 * h)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn base_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.problem.id(), self.solver.label()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.window > 0.0 && self.window <= 1.0) {
            return bad(format!("window must lie in (0, 1], got {}", self.window));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return bad(format!("name {name:?} is not a plain file stem"));
            }
        }
        let g = &self.grid;
        match (g.steps, g.duration) {
            (Some(_), Some(_)) => return bad("grid sets both steps and duration".into()),
            (None, None) => return bad("grid needs steps or duration".into()),
            (_, Some(d)) if !(d > 0.0 && d.is_finite()) => {
                return bad(format!("duration must be positive, got {d}"))
            }
            (Some(0), _) => return bad("grid needs at least one step".into()),
            _ => {}
        }
        if g.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        if let Some(h) = g.h {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("h must be positive, got {h}"));
            }
        }
        if let Some(sweep) = &g.sweep {
            if let Some(h) = sweep.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
                return bad(format!("sweep values must be positive, got {h}"));
            }
            for (i, a) in sweep.iter().enumerate() {
                if sweep[..i].contains(a) {
                    return bad(format!("sweep value {a} is repeated"));
                }
            }
        }
        if g.h.is_none() && g.sweep.is_none() {
            return bad("grid needs h or sweep".into());
        }
        let supported = match (&self.problem, &self.solver) {
            (ProblemSpec::RobotNav, SolverSpec::RobotNav { .. }) => true,
            (ProblemSpec::ConstrainedQuadratic { .. }, SolverSpec::BarrierFlow { .. }) => true,
            (ProblemSpec::RobotNav | ProblemSpec::ConstrainedQuadratic { .. }, _) => false,
            (_, SolverSpec::RobotNav { .. } | SolverSpec::BarrierFlow { .. }) => false,
            (ProblemSpec::PowerGrid, SolverSpec::Flow { .. }) => false,
            (ProblemSpec::RobotTracking { lambda, .. }, SolverSpec::Flow { .. }) => *lambda == 0.0,
            _ => true,
        };
        if !supported {
            return bad(format!(
                "solver {} does not apply to problem {}",
                self.solver.id(),
                self.problem.id()
            ));
        }
        if let SolverSpec::PredictionCorrection {
            predictor: PredictorSpec::Kalman,
            ..
        } = self.solver
        {
            if !matches!(self.problem, ProblemSpec::SinusoidQuadratic { .. }) {
                return bad(
                    "the kalman predictor ships a model for sinusoid_quadratic only".into(),
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        id = "sinusoid_quadratic"
        [solver]
        id = "unstructured"
        [grid]
        h = 0.1
        steps = 10
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.window, DEFAULT_WINDOW_FRACTION);
        assert_eq!(cfg.seed, 0);
        assert_eq!(
            cfg.problem,
            ProblemSpec::SinusoidQuadratic {
                omega: 1.0,
                amplitude: 1.0,
                dim: 1
            }
        );
        assert_eq!(cfg.base_name(), "sinusoid_quadratic-unstructured_c1");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("steps = 10", "steps = 10\nbogus = 1");
        assert!(matches!(
            ExperimentConfig::parse(&text),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn duration_and_steps_are_exclusive() {
        let text = MINIMAL.replace("steps = 10", "steps = 10\nduration = 1.0");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace("steps = 10", "duration = 1.0");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.grid.steps_for(0.1), 10);
    }

    #[test]
    fn sweep_values_must_be_distinct_and_positive() {
        let text = MINIMAL.replace("h = 0.1", "sweep = [0.1, 0.05, 0.1]");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace("h = 0.1", "sweep = [0.1, -0.05, 0.2]");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn mismatched_solver_is_rejected() {
        let text = MINIMAL.replace("sinusoid_quadratic", "robot_nav");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn shipped_configs_validate() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
        assert!(seen >= 8);
    }

    #[test]
    fn labels_encode_budget() {
        let text = MINIMAL.replace(
            "id = \"unstructured\"",
            "id = \"prediction_correction\"\npredictor = \"taylor\"\nprediction_steps = 3",
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.solver.label(), "taylor_p3_c1");
    }
}
