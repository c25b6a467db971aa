//! Lift-curve slope of an isolated rectangular wing against lifting-line theory.

use std::sync::Arc;

use morphwing::aero::{AeroModel, Kinematics, UvlmSolver, WakeLayout};
use morphwing::vehicle::{default_config, rectangular_wing};

fn main() -> morphwing::Result<()> {
    let aspect = 20.0;
    let chord = 1.0;
    let span = aspect * chord;
    let lattice = rectangular_wing(span, chord, 4, 40);
    let layout = WakeLayout::new(&lattice, chord / 4.0, 120);
    let config = default_config();
    let model = Arc::new(AeroModel::from_lattice(&config, lattice, layout)?);
    let mut solver = UvlmSolver::new(model, 1.0);
    let speed = 10.0;
    let rho = config.environment.air_density;
    let alpha = 2f64.to_radians();
    let kin = Kinematics::freestream(speed, alpha, 0.0);
    let state = solver.steady_state(&kin)?;
    let loads = solver.loads(&state, &kin)?;
    let (lift, _) = loads.lift_drag(&kin.velocity);
    let cl = lift / (0.5 * rho * speed * speed * span * chord);
    let slope = cl / alpha;
    let theory = 2.0 * std::f64::consts::PI / (1.0 + 2.0 / aspect);
    println!("CL_alpha = {slope:.4} /rad, lifting line {theory:.4} /rad, ratio {:.4}", slope / theory);
    println!("induced drag CDi = {:.3e}", loads.induced_drag / (0.5 * rho * speed * speed * span * chord));
    Ok(())
}
