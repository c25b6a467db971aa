//! Frozen and morphing optimum of one maneuver: `cargo run --release --example maneuver -- pull_up [z_goal]`.

use std::time::Instant;

use morphwing::flightdyn::Simulator;
use morphwing::ocp::{make_scenario, solve_with, ScenarioKind, ScenarioParams, SolverSettings};
use morphwing::trim::static_trim;
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: ScenarioKind = args.next().unwrap_or_else(|| "pull_up".into()).parse()?;
    let z_goal = args.next().and_then(|s| s.parse().ok()).or(Some(0.5));
    let config = default_config();
    let sim = Simulator::new(&config, 1.0)?;
    let trim = static_trim(&sim, config.trim.nominal_speed, 0.0)?.point();
    let params = ScenarioParams { z_goal, ..ScenarioParams::default() };
    let problem = make_scenario(kind, &params, &sim, &trim, &SolverSettings::default())?;
    let frozen_problem = problem.frozen();
    let mut previous = None;
    for (label, p) in [("frozen", &frozen_problem), ("morphing", &problem)] {
        let t0 = Instant::now();
        let init = previous.take().unwrap_or_else(|| p.hold());
        let r = solve_with(p, &init, |rec| {
            println!(
                "  {label} it {:>3}  J {:>12.6}  violation {:>9.3e}  radius {:>8.3}  evals {}",
                rec.iteration, rec.objective, rec.violation, rec.radius, rec.evaluations
            )
        })?;
        println!(
            "{label}: J {:.6}, feasible {}, {:?} after {} iterations in {:.2?}",
            r.objective(),
            r.feasible,
            r.status,
            r.iterations,
            t0.elapsed()
        );
        for res in &r.residuals {
            println!("    {:<14} {:>12.6} (tolerance {})", res.name, res.value, res.tolerance);
        }
        println!("    work {:.4} J", r.work.total);
        previous = Some(r.schedule.clone());
    }
    Ok(())
}
