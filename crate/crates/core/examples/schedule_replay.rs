//! Hand-written winglet schedule: simulate it, price it, and round-trip it through the CSV format.

use morphwing::actuation::{control_work, SURFACE_NAMES};
use morphwing::flightdyn::{Simulator, CHANNEL_NAMES, MORPH_LEFT, MORPH_RIGHT};
use morphwing::io::schema::{parse_schedule_csv, schedule_csv};
use morphwing::ocp::ControlSchedule;
use morphwing::trim::static_trim;
use morphwing::vehicle::default_config;

fn main() -> morphwing::Result<()> {
    let config = default_config();
    let sim = Simulator::new(&config, 1.0)?;
    let trim = static_trim(&sim, config.trim.nominal_speed, 0.0)?.point();
    let mut schedule = ControlSchedule::hold(trim.controls, 1.0, 5)?;
    // both tips up 10 deg and back
    for (k, deg) in [(1, 5.0), (2, 10.0), (3, 5.0)] {
        schedule.points[k][MORPH_LEFT] = f64::to_radians(deg);
        schedule.points[k][MORPH_RIGHT] = f64::to_radians(deg);
    }
    let traj = sim.simulate(&trim, &schedule, schedule.horizon)?;
    let work = control_work(&traj, config.aero.power_model)?;
    let last = traj.last();
    println!("altitude change {:.4} m, pitch {:.3} deg", traj.altitude().last().unwrap_or(&0.0), last.rigid.euler.y.to_degrees());
    for (i, w) in work.per_surface.iter().enumerate() {
        if *w > 0.0 {
            println!("  {:<14} {:.4} J", SURFACE_NAMES[i], w);
        }
    }
    println!("total {:.4} J", work.total);
    let text = String::from_utf8(schedule_csv(&schedule)?).expect("csv is utf-8");
    let back = parse_schedule_csv(&text, trim.controls)?;
    let err = (0..schedule.len())
        .flat_map(|k| (0..CHANNEL_NAMES.len()).map(move |i| (k, i)))
        .map(|(k, i)| (back.point(k).0[i] - schedule.point(k).0[i]).abs())
        .fold(0.0, f64::max);
    println!("csv round trip max error {err:.1e}");
    Ok(())
}
