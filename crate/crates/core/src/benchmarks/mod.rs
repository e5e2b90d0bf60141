//! Problem instances: sinusoidal quadratics, composite tracking, power-grid
//! setpoint tracking, a static constrained quadratic, and robot navigation.

mod power_grid;
mod robot;
mod sinusoid;
mod tracking;

pub use power_grid::{Harmonic, PowerGrid, SyntheticSignal, DESK_SMOOTHNESS};
pub use robot::{
    local_free_space, project_goal_reference, run_robot_navigation, GoalPath, NavigationConfig,
    NavigationMode, NavigationRun, Obstacle, RobotScene,
};
pub use sinusoid::SinusoidQuadratic;
pub use tracking::{RobotTracking, TrackingSignal};

use crate::continuous::{ConstrainedProblem, LinearConstraint};
use crate::error::Result;
use crate::problem::Vector;

/// `min 0.5 (x - target)^2` subject to `x <= bound`, with its optimizer.
pub fn constrained_quadratic(
    target: f64,
    bound: f64,
) -> Result<ConstrainedProblem<SinusoidQuadratic>> {
    let objective = SinusoidQuadratic::new(0.0, target, 1)?;
    let optimum = target.min(bound);
    Ok(ConstrainedProblem::new(
        objective,
        vec![Box::new(LinearConstraint {
            normal: Vector::from_element(1, 1.0),
            offset: bound,
        })],
    )
    .with_reference(Box::new(move |_| Vector::from_element(1, optimum))))
}
