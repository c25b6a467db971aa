//! Trim envelope of the fixed and morphing aircraft over a speed range.

use std::time::Instant;

use morphwing::flightdyn::Simulator;
use morphwing::trim::trim_envelope;
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let config = default_config();
    let sim = Simulator::new(&config, 1.0)?;
    let speeds: Vec<f64> = (0..6).map(|i| 25.0 + 2.5 * i as f64).collect();
    let t0 = Instant::now();
    let fixed = trim_envelope(&sim, &speeds, false);
    let morphing = trim_envelope(&sim, &speeds, true);
    print!("{}", fixed.to_text());
    print!("{}", morphing.to_text());
    let (f, m) = (fixed.trimmed_speeds(), morphing.trimmed_speeds());
    println!("morphing envelope contains fixed: {} ({:.2?})", f.iter().all(|v| m.contains(v)), t0.elapsed());
    Ok(())
}
