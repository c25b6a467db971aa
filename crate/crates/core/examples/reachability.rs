//! Climb target reachable only with morphing winglets, found by bisection between the two pull-up ceilings.

use morphwing::flightdyn::Simulator;
use morphwing::ocp::{reachability_bisection, ScenarioParams, SolverSettings};
use morphwing::trim::static_trim;
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let probes = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let config = default_config();
    let sim = Simulator::new(&config, 1.0)?;
    let trim = static_trim(&sim, config.trim.nominal_speed, 0.0)?.point();
    let study = reachability_bisection(&sim, &trim, &ScenarioParams::default(), &SolverSettings::default(), probes)?;
    println!("ceilings: frozen {:.4} m, morphing {:.4} m", study.frozen_ceiling, study.morphing_ceiling);
    for p in &study.probes {
        println!(
            "  z {:.4}: frozen {} ({:.4} J), morphing {} ({:.4} J)",
            p.z_goal, p.frozen_feasible, p.frozen_work, p.morphing_feasible, p.morphing_work
        );
    }
    match study.separating_goal {
        Some(z) => println!("only morphing reaches {z:.4} m"),
        None => println!("no separating goal within {probes} probes"),
    }
    Ok(())
}
