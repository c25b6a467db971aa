//! Frozen pull-up optimum at several control-point counts.

use morphwing::flightdyn::Simulator;
use morphwing::ocp::{control_point_sweep, sweep_change, ScenarioKind, ScenarioParams, SolverSettings};
use morphwing::trim::static_trim;
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let counts: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let counts = if counts.is_empty() { vec![13, 25] } else { counts };
    let config = default_config();
    let sim = Simulator::new(&config, 1.0)?;
    let trim = static_trim(&sim, config.trim.nominal_speed, 0.0)?.point();
    let params = ScenarioParams { morphing: false, ..ScenarioParams::default() };
    let entries = control_point_sweep(&sim, &trim, ScenarioKind::PullUp, &params, &SolverSettings::default(), &counts)?;
    for e in &entries {
        println!("N {:>3}: J {:.6}, feasible {}, {} iterations", e.points, e.objective, e.feasible, e.iterations);
    }
    if let Some(c) = sweep_change(&entries) {
        println!("relative change {c:.3e}");
    }
    Ok(())
}
