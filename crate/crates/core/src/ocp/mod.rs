//! Direct-shooting trajectory optimization.

pub mod problem;
pub mod qp;
pub mod schedule;
pub mod solve;
pub mod sqp;

pub use problem::{
    fd_gradient, make_scenario, obstacle_margin, smooth_min, FdGradient, GoalDisc, Obstacle, OcpEvaluation,
    OcpProblem, Quantity, ScenarioKind, ScenarioParams, SolverSettings, TerminalCost, TerminalTarget,
};
pub use schedule::ControlSchedule;
pub use solve::{
    control_point_sweep, reachability_bisection, solve, solve_pair, solve_with, sweep_change, Comparison, OptResult,
    ReachabilityStudy, ReachProbe, Residual, SweepEntry,
};
