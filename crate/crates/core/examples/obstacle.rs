//! Lateral avoidance of a cylindrical obstacle, with the clearance along the optimal path.

use morphwing::flightdyn::Simulator;
use morphwing::ocp::{make_scenario, solve_pair, ScenarioKind, ScenarioParams, SolverSettings};
use morphwing::trim::static_trim;
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let config = default_config();
    let sim = Simulator::new(&config, 1.0)?;
    let trim = static_trim(&sim, config.trim.nominal_speed, 0.0)?.point();
    let problem = make_scenario(ScenarioKind::Obstacle, &ScenarioParams::default(), &sim, &trim, &SolverSettings::default())?;
    let (e, _) = problem.evaluate(&problem.hold())?;
    println!("straight ahead: min margin {:.4} m", e.min_margin().unwrap_or(f64::NAN));
    let pair = solve_pair(&problem)?;
    for r in [&pair.frozen, &pair.morphing] {
        let label = if r.morphing { "morphing" } else { "frozen" };
        println!(
            "{label}: J {:.6}, feasible {}, min margin {:.4} m, max lateral {:.3} m",
            r.objective(),
            r.feasible,
            r.evaluation.min_margin().unwrap_or(f64::NAN),
            r.trajectory.max_lateral()
        );
    }
    println!("morphing dominates: {}", pair.dominates(1e-3));
    Ok(())
}
