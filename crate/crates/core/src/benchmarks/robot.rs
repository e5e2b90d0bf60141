//! Disk robot navigating among circular obstacles. The robot chases an
//! estimate `x_hat` that follows a barrier flow over its collision-free
//! local workspace, itself a polytope rebuilt from the robot position.
//!
//! Shipped layout (workspace `[-20, 20] x [-20, 25]`, robot radius 1):
//!
//! | center      | radius |
//! |-------------|--------|
//! | (-10, 8)    | 2.5    |
//! | (0, 14)     | 2.0    |
//! | (10, 8)     | 2.5    |
//! | (-12, -6)   | 2.0    |
//! | (0, 0)      | 3.0    |
//! | (12, -6)    | 2.0    |
//! | (-5, -14)   | 2.0    |
//! | (6, -14)    | 2.5    |
//!
//! The robot starts at (-16, -16); the goal circles (0, 2) with radius 12
//! once every 80 s, passing through several inflated obstacles.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::continuous::{
    integrate, FlowConfig, FlowTrajectory, Integrator, Observation, VectorField,
};
use crate::error::{Result, TvError};
use crate::problem::{
    dykstra, BoxSet, Matrix, Polytope, Vector, DYKSTRA_MAX_SWEEPS, DYKSTRA_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    fn center(&self) -> Vector {
        Vector::from_row_slice(&self.center)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalPath {
    Fixed {
        point: [f64; 2],
    },
    /// `center + radius (cos(omega t), sin(omega t))`.
    Orbit {
        center: [f64; 2],
        radius: f64,
        omega: f64,
    },
}

impl GoalPath {
    pub fn position(&self, t: f64) -> Vector {
        match self {
            GoalPath::Fixed { point } => Vector::from_row_slice(point),
            GoalPath::Orbit {
                center,
                radius,
                omega,
            } => Vector::from_row_slice(&[
                center[0] + radius * (omega * t).cos(),
                center[1] + radius * (omega * t).sin(),
            ]),
        }
    }

    pub fn velocity(&self, t: f64) -> Vector {
        match self {
            GoalPath::Fixed { .. } => Vector::zeros(2),
            GoalPath::Orbit { radius, omega, .. } => Vector::from_row_slice(&[
                -radius * omega * (omega * t).sin(),
                radius * omega * (omega * t).cos(),
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotScene {
    pub workspace_lower: [f64; 2],
    pub workspace_upper: [f64; 2],
    pub obstacles: Vec<Obstacle>,
    pub robot_radius: f64,
    pub start: [f64; 2],
    pub goal: GoalPath,
    /// Controller gain `G_c` of `x_r' = -G_c (x_r - x_hat)`.
    pub gain: f64,
}

impl RobotScene {
    pub fn validate(&self) -> Result<()> {
        if !(self.robot_radius > 0.0) || !(self.gain > 0.0) {
            return Err(TvError::InvalidConfig(
                "robot radius and gain must be positive".into(),
            ));
        }
        let eroded = self.eroded_workspace()?;
        let start = Vector::from_row_slice(&self.start);
        if eroded.violation(&start) >= 0.0 {
            return Err(TvError::InvalidConfig(
                "start must lie strictly inside the eroded workspace".into(),
            ));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(TvError::InvalidConfig(format!(
                    "obstacle {i} has nonpositive radius"
                )));
            }
            for (j, p) in self.obstacles.iter().enumerate().skip(i + 1) {
                if (o.center() - p.center()).norm() <= o.radius + p.radius {
                    return Err(TvError::InvalidConfig(format!(
                        "obstacles {i} and {j} intersect"
                    )));
                }
            }
            if (&start - o.center()).norm() <= o.radius + self.robot_radius {
                return Err(TvError::Collision {
                    obstacle: i,
                    t: 0.0,
                });
            }
        }
        Ok(())
    }

    /// The eight-obstacle layout documented at the top of this module.
    pub fn shipped() -> Self {
        let obstacles = [
            ([-10.0, 8.0], 2.5),
            ([0.0, 14.0], 2.0),
            ([10.0, 8.0], 2.5),
            ([-12.0, -6.0], 2.0),
            ([0.0, 0.0], 3.0),
            ([12.0, -6.0], 2.0),
            ([-5.0, -14.0], 2.0),
            ([6.0, -14.0], 2.5),
        ]
        .into_iter()
        .map(|(center, radius)| Obstacle { center, radius })
        .collect();
        Self {
            workspace_lower: [-20.0, -20.0],
            workspace_upper: [20.0, 25.0],
            obstacles,
            robot_radius: 1.0,
            start: [-16.0, -16.0],
            goal: GoalPath::Orbit {
                center: [0.0, 2.0],
                radius: 12.0,
                omega: 2.0 * std::f64::consts::PI / 80.0,
            },
            gain: 2.0,
        }
    }

    /// Workspace box shrunk by the robot radius.
    pub fn eroded_workspace(&self) -> Result<BoxSet> {
        let r = self.robot_radius;
        BoxSet::new(
            Vector::from_row_slice(&[self.workspace_lower[0] + r, self.workspace_lower[1] + r]),
            Vector::from_row_slice(&[self.workspace_upper[0] - r, self.workspace_upper[1] - r]),
        )
    }

    /// Smallest surface gap `|x_r - x_i| - r_i - r` over all obstacles.
    pub fn clearance(&self, x_r: &Vector) -> f64 {
        self.obstacles
            .iter()
            .map(|o| (x_r - o.center()).norm() - o.radius - self.robot_radius)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One separating halfspace per obstacle, placed midway across the gap
/// between the robot and the obstacle after inflating both by the robot
/// radius, intersected with the eroded workspace.
pub fn local_free_space(scene: &RobotScene, x_r: &Vector) -> Result<Polytope> {
    let r = scene.robot_radius;
    let mut normals = Vec::with_capacity(scene.obstacles.len());
    let mut offsets = Vec::with_capacity(scene.obstacles.len());
    for o in &scene.obstacles {
        let a = o.center() - x_r;
        let d = a.norm();
        if d <= o.radius + r {
            return Err(TvError::Infeasible {
                violation: o.radius + r - d,
            });
        }
        offsets.push(a.dot(x_r) + d * (d - o.radius - r) / 2.0);
        normals.push(a);
    }
    Polytope::new(normals, offsets, Some(scene.eroded_workspace()?))
}

/// High-accuracy projection of the goal onto the local workspace.
///
/// Dykstra's method can sit on a plateau for longer than its stall window
/// and report a false infeasibility; planar polytopes then fall back to an
/// exact active-set enumeration.
pub fn project_goal_reference(polytope: &Polytope, x_d: &Vector, tolerance: f64) -> Result<Vector> {
    match dykstra(polytope, x_d, tolerance, DYKSTRA_MAX_SWEEPS) {
        Err(TvError::Infeasible { .. } | TvError::ProjectionNotConverged { .. })
            if x_d.len() == 2 =>
        {
            planar_projection(polytope, x_d)
        }
        other => other,
    }
}

/// Exact projection onto a planar polytope: the closest feasible point among
/// `x`, its projections onto each edge line, and all pairwise vertices.
fn planar_projection(polytope: &Polytope, x: &Vector) -> Result<Vector> {
    let mut lines: Vec<(Vector, f64)> = polytope
        .normals
        .iter()
        .cloned()
        .zip(polytope.offsets.iter().copied())
        .collect();
    if let Some(b) = &polytope.bounds {
        for j in 0..2 {
            let e = Vector::from_fn(2, |i, _| if i == j { 1.0 } else { 0.0 });
            lines.push((e.clone(), b.upper[j]));
            lines.push((-e, -b.lower[j]));
        }
    }
    let feasible = |p: &Vector| {
        lines
            .iter()
            .all(|(a, b)| a.dot(p) - b <= 1e-12 * a.norm() * (1.0 + b.abs() / a.norm()))
    };
    let mut candidates = vec![x.clone()];
    for (a, b) in &lines {
        candidates.push(x - a * ((a.dot(x) - b) / a.norm_squared()));
    }
    for (i, (a1, b1)) in lines.iter().enumerate() {
        for (a2, b2) in &lines[i + 1..] {
            let det = a1[0] * a2[1] - a1[1] * a2[0];
            if det.abs() > 1e-12 * a1.norm() * a2.norm() {
                candidates.push(Vector::from_row_slice(&[
                    (b1 * a2[1] - b2 * a1[1]) / det,
                    (a1[0] * b2 - a2[0] * b1) / det,
                ]));
            }
        }
    }
    candidates
        .into_iter()
        .filter(|p| feasible(p))
        .min_by(|p, q| (p - x).norm().total_cmp(&(q - x).norm()))
        .ok_or(TvError::Infeasible {
            violation: f64::NAN,
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavigationMode {
    /// Includes the time derivative of the barrier gradient.
    StructuredBarrier,
    /// Newton-type correction only, same linear solve per evaluation.
    UnstructuredBarrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationConfig {
    pub kappa: f64,
    pub c0: f64,
    pub c_rate: f64,
    pub t_end: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub record_every: usize,
}

impl Default for NavigationConfig {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            c0: 1.0,
            c_rate: 0.1,
            t_end: 120.0,
            dt: 0.01,
            integrator: Integrator::Rk4,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigationRun {
    pub mode: NavigationMode,
    pub times: Vec<f64>,
    pub robot: Vec<Vector>,
    pub estimate: Vec<Vector>,
    pub reference: Vec<Vector>,
    /// `|x_hat(t) - x*(t)|` with `x*` the projected goal.
    pub errors: Vec<f64>,
    /// Smallest robot-obstacle surface gap over the recorded samples.
    pub min_clearance: f64,
    /// Joint state `(x_r, x_hat)` trajectory as integrated.
    pub flow: FlowTrajectory,
}

struct Face {
    a: Vector,
    b: f64,
    a_dot: Vector,
    b_dot: f64,
}

struct NavigationField<'a> {
    scene: &'a RobotScene,
    eroded: BoxSet,
    mode: NavigationMode,
    config: NavigationConfig,
}

impl NavigationField<'_> {
    fn split(z: &Vector) -> (Vector, Vector) {
        (z.rows(0, 2).into_owned(), z.rows(2, 2).into_owned())
    }

    fn c(&self, t: f64) -> f64 {
        self.config.c0 * (self.config.c_rate * t).exp()
    }

    fn faces(&self, x_r: &Vector, xr_dot: &Vector, t: f64) -> Result<Vec<Face>> {
        let r = self.scene.robot_radius;
        let mut faces = Vec::with_capacity(self.scene.obstacles.len() + 4);
        for (i, o) in self.scene.obstacles.iter().enumerate() {
            let a = o.center() - x_r;
            let d = a.norm();
            if d <= o.radius + r {
                return Err(TvError::Collision { obstacle: i, t });
            }
            let a_dot = -xr_dot;
            let d_dot = a.dot(&a_dot) / d;
            let b = a.dot(x_r) + d * (d - o.radius - r) / 2.0;
            let b_dot = a_dot.dot(x_r) + a.dot(xr_dot) + d_dot * (2.0 * d - o.radius - r) / 2.0;
            faces.push(Face { a, b, a_dot, b_dot });
        }
        for j in 0..2 {
            let e = Vector::from_fn(2, |i, _| if i == j { 1.0 } else { 0.0 });
            faces.push(Face {
                a: e.clone(),
                b: self.eroded.upper[j],
                a_dot: Vector::zeros(2),
                b_dot: 0.0,
            });
            faces.push(Face {
                a: -e,
                b: -self.eroded.lower[j],
                a_dot: Vector::zeros(2),
                b_dot: 0.0,
            });
        }
        Ok(faces)
    }

    fn barrier_gradient(&self, faces: &[Face], x_hat: &Vector, t: f64) -> Result<Vector> {
        let inv_c = 1.0 / self.c(t);
        let mut g = x_hat - self.scene.goal.position(t);
        for f in faces {
            let u = f.b - f.a.dot(x_hat);
            if !(u > 0.0) {
                return Err(TvError::Domain { t, margin: u });
            }
            g += &f.a * (inv_c / u);
        }
        Ok(g)
    }
}

impl NavigationField<'_> {
    /// Total time derivative of the barrier gradient at fixed `x_hat`, with
    /// the faces moving along the robot velocity.
    fn barrier_time_gradient(&self, faces: &[Face], x_hat: &Vector, t: f64) -> Vector {
        let c = self.c(t);
        let c_dot = self.config.c_rate * c;
        let mut out = -self.scene.goal.velocity(t);
        for f in faces {
            let u = f.b - f.a.dot(x_hat);
            let u_dot = f.b_dot - f.a_dot.dot(x_hat);
            out += &f.a * (-c_dot / (c * c * u)) + &f.a_dot * (1.0 / (c * u))
                - &f.a * (u_dot / (c * u * u));
        }
        out
    }
}

impl VectorField for NavigationField<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn eval(&self, z: &Vector, t: f64) -> Result<Vector> {
        let (x_r, x_hat) = Self::split(z);
        let xr_dot = (&x_r - &x_hat) * -self.scene.gain;
        let faces = self.faces(&x_r, &xr_dot, t)?;
        let grad = self.barrier_gradient(&faces, &x_hat, t)?;
        let c = self.c(t);

        let mut hess = Matrix::identity(2, 2);
        for f in &faces {
            let u = f.b - f.a.dot(&x_hat);
            hess += &f.a * f.a.transpose() * (1.0 / (c * u * u));
        }
        let time_grad = self.barrier_time_gradient(&faces, &x_hat, t);
        let rhs = match self.mode {
            NavigationMode::StructuredBarrier => grad * self.config.kappa + time_grad,
            NavigationMode::UnstructuredBarrier => grad * self.config.kappa,
        };
        // 2x2 and positive definite by construction; the barrier makes it badly
        // conditioned near a face, which Cholesky handles accurately.
        let xhat_dot = -hess
            .cholesky()
            .ok_or(TvError::NotPositiveDefinite)?
            .solve(&rhs);

        let mut out = Vector::zeros(4);
        out.rows_mut(0, 2).copy_from(&xr_dot);
        out.rows_mut(2, 2).copy_from(&xhat_dot);
        Ok(out)
    }

    fn margin(&self, z: &Vector, _t: f64) -> Option<f64> {
        let (x_r, x_hat) = Self::split(z);
        let clearance = self.scene.clearance(&x_r);
        if !(clearance > 0.0) {
            return Some(clearance);
        }
        let poly = local_free_space(self.scene, &x_r).ok()?;
        let faces = poly
            .slacks(&x_hat)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let boxed = -self.eroded.violation(&x_hat);
        Some(clearance.min(faces).min(boxed))
    }
}

/// Co-integrates the robot and the barrier estimate from `x_hat(0) = x_r(0)`.
pub fn run_robot_navigation(
    scene: &RobotScene,
    mode: NavigationMode,
    config: &NavigationConfig,
) -> Result<NavigationRun> {
    scene.validate()?;
    if !(config.c0 > 0.0) || !(config.c_rate >= 0.0) {
        return Err(TvError::InvalidConfig(
            "barrier weight schedule must be positive and nondecreasing".into(),
        ));
    }
    let field = NavigationField {
        scene,
        eroded: scene.eroded_workspace()?,
        mode,
        config: *config,
    };
    let start = Vector::from_row_slice(&scene.start);
    let z0 = Vector::from_row_slice(&[start[0], start[1], start[0], start[1]]);
    let flow_cfg = FlowConfig::new(config.kappa, (0.0, config.t_end), config.dt, z0)?
        .with_integrator(config.integrator)
        .with_record_every(config.record_every);

    let failure: RefCell<Option<TvError>> = RefCell::new(None);
    let flow = integrate(&field, &flow_cfg, |z, t| {
        let (x_r, x_hat) = NavigationField::split(z);
        let reference = local_free_space(scene, &x_r).and_then(|poly| {
            project_goal_reference(&poly, &scene.goal.position(t), DYKSTRA_TOLERANCE)
        });
        match reference {
            Ok(r) => Observation {
                error: Some((&x_hat - &r).norm()),
                reference: Some(r),
                lyapunov: f64::NAN,
            },
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Observation {
                    reference: None,
                    error: None,
                    lyapunov: f64::NAN,
                }
            }
        }
    })?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }

    let mut run = NavigationRun {
        mode,
        times: Vec::with_capacity(flow.record.len()),
        robot: Vec::with_capacity(flow.record.len()),
        estimate: Vec::with_capacity(flow.record.len()),
        reference: Vec::with_capacity(flow.record.len()),
        errors: Vec::with_capacity(flow.record.len()),
        min_clearance: f64::INFINITY,
        flow: flow.clone(),
    };
    for step in &flow.record.steps {
        let x_r = Vector::from_row_slice(&step.x[..2]);
        run.min_clearance = run.min_clearance.min(scene.clearance(&x_r));
        run.times.push(step.t);
        run.robot.push(x_r);
        run.estimate.push(Vector::from_row_slice(&step.x[2..]));
        run.reference.push(Vector::from_row_slice(
            step.reference.as_deref().unwrap_or(&[f64::NAN, f64::NAN]),
        ));
        run.errors.push(step.error.unwrap_or(f64::NAN));
    }
    if let Some(i) = (0..scene.obstacles.len()).find(|_| !(run.min_clearance > 0.0)) {
        return Err(TvError::Collision {
            obstacle: i,
            t: config.t_end,
        });
    }
    Ok(run)
}
