//! Static then dynamic trim of the default aircraft at its nominal speed.

use std::time::Instant;

use morphwing::flightdyn::Simulator;
use morphwing::trim::{dynamic_trim, static_trim};
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let config = default_config();
    let speed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(config.trim.nominal_speed);
    let t0 = Instant::now();
    let sim = Simulator::new(&config, 1.0)?;
    println!("aero tables built in {:.2?}", t0.elapsed());
    let t1 = Instant::now();
    let s = static_trim(&sim, speed, 0.0)?;
    println!(
        "static:  alpha {:.4} deg, elevator {:.4} deg, thrust {:.3} N, w {:.2e} m/s, q {:.2e} deg/s, J {:.4} ({} iterations, {:.2?})",
        s.alpha.to_degrees(),
        s.elevator().to_degrees(),
        s.thrust(),
        s.residual_w,
        s.residual_q_deg,
        s.cost,
        s.iterations,
        t1.elapsed()
    );
    let t2 = Instant::now();
    let d = dynamic_trim(&sim, &s, true)?;
    println!(
        "dynamic: alpha {:.4} deg, elevator {:.4} deg, winglets {:.3} deg, thrust {:.3} N, w {:.2e} m/s, q {:.2e} deg/s, J {:.4}, trimmed {} ({:.2?})",
        d.alpha.to_degrees(),
        d.elevator().to_degrees(),
        d.morph().to_degrees(),
        d.thrust(),
        d.residual_w,
        d.residual_q_deg,
        d.cost,
        d.converged,
        t2.elapsed()
    );
    Ok(())
}
