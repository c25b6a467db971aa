//! Impulsively started wing: circulatory lift history against its steady value.

use std::sync::Arc;

use morphwing::aero::{AeroModel, AeroState, Kinematics, UvlmSolver, WakeLayout};
use morphwing::vehicle::{default_config, rectangular_wing};

fn main() -> morphwing::Result<()> {
    let chordwise: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let chord = 1.0;
    let speed = 10.0;
    let dt = chord / (chordwise as f64 * speed);
    let lattice = rectangular_wing(20.0, chord, chordwise, 20);
    let rows = (30.0 * chord / (speed * dt)).round() as usize;
    let layout = WakeLayout::new(&lattice, speed * dt, rows);
    let model = Arc::new(AeroModel::from_lattice(&default_config(), lattice, layout)?);
    let mut solver = UvlmSolver::new(model.clone(), dt);
    let kin = Kinematics::freestream(speed, 5f64.to_radians(), 0.0);
    let steady = solver.steady_state(&kin)?;
    let steady_lift = solver.loads(&steady, &kin)?.circulatory_lift(&kin.velocity);
    let mut state = AeroState::at_rest(model.panel_count(), model.layout.total);
    let steps = (30.0 * chord / (speed * dt)).round() as usize;
    for k in 1..=steps {
        state = solver.step(&state, &kin)?.0;
        let lift = solver.loads(&state, &kin)?.circulatory_lift(&kin.velocity);
        if k <= 3 || k % (steps / 10) == 0 {
            println!("s = {:6.2} chords  L/L_steady = {:.4}", k as f64 * speed * dt / chord, lift / steady_lift);
        }
    }
    Ok(())
}
