//! Six-degree-of-freedom flight dynamics coupled to the vortex lattice.

mod sim;

pub use sim::{Checkpoint, LoadFrame, SimOptions, Simulator, Trajectory, TrajectorySample};

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use crate::vehicle::config::AircraftConfig;
use crate::Vec3;

pub const ELEVATOR: usize = 0;
pub const AILERON_LEFT: usize = 1;
pub const AILERON_RIGHT: usize = 2;
pub const RUDDER: usize = 3;
pub const MORPH_LEFT: usize = 4;
pub const MORPH_RIGHT: usize = 5;
pub const THRUST: usize = 6;
pub const CHANNELS: usize = 7;
pub const CHANNEL_NAMES: [&str; CHANNELS] =
    ["elevator", "aileron_left", "aileron_right", "rudder", "morph_left", "morph_right", "thrust"];

/// Deflections in rad (elevator, ailerons, rudder, winglets) and thrust in N.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlVector(pub [f64; CHANNELS]);

impl ControlVector {
    pub fn surfaces(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn morph(&self) -> [f64; 2] {
        [self.0[MORPH_LEFT], self.0[MORPH_RIGHT]]
    }

    pub fn thrust(&self) -> f64 {
        self.0[THRUST]
    }

    pub fn sub(&self, other: &ControlVector) -> [f64; CHANNELS] {
        std::array::from_fn(|i| self.0[i] - other.0[i])
    }
}

/// Control history applied during the maneuver window `[0, horizon]`.
pub trait ControlInput: Sync {
    fn controls(&self, t: f64) -> ControlVector;

    /// Right derivative of the controls.
    fn rates(&self, t: f64) -> [f64; CHANNELS];

    /// Times where the rates may jump.
    fn knots(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Constant controls.
#[derive(Debug, Clone, Copy)]
pub struct HoldControls(pub ControlVector);

impl ControlInput for HoldControls {
    fn controls(&self, _t: f64) -> ControlVector {
        self.0
    }

    fn rates(&self, _t: f64) -> [f64; CHANNELS] {
        [0.0; CHANNELS]
    }
}

/// Equilibrium the maneuver starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimPoint {
    pub speed: f64,
    pub alpha: f64,
    pub controls: ControlVector,
}

impl TrimPoint {
    pub fn initial_state(&self) -> RigidState {
        RigidState {
            position: Vec3::zeros(),
            euler: Vec3::new(0.0, self.alpha, 0.0),
            velocity: Vec3::new(self.speed * self.alpha.cos(), 0.0, self.speed * self.alpha.sin()),
            omega: Vec3::zeros(),
        }
    }
}

/// Rigid-body coordinates and body-frame rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidState {
    /// Inertial position (x north, y east, z down).
    pub position: Vec3,
    /// Roll, pitch, yaw.
    pub euler: Vec3,
    /// Body velocity (u, v, w).
    pub velocity: Vec3,
    /// Body rates (p, q, r).
    pub omega: Vec3,
}

impl RigidState {
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.euler.x, self.euler.y, self.euler.z)
    }

    pub fn altitude(&self) -> f64 {
        -self.position.z
    }

    /// Gravity in body axes.
    pub fn gravity_body(&self, g: f64) -> Vec3 {
        self.rotation().inverse() * Vec3::new(0.0, 0.0, g)
    }
}

/// Modal plunge coordinates of the flexible wing (left, right), positive down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlexState {
    pub eta: [f64; 2],
    pub eta_rate: [f64; 2],
}

/// Rates of change of the rigid state in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accelerations {
    pub velocity: Vec3,
    pub omega: Vec3,
    pub modal: [f64; 2],
}

/// Euler-angle rates from body rates.
pub fn euler_rates(euler: &Vec3, omega: &Vec3) -> Vec3 {
    let (sp, cp) = euler.x.sin_cos();
    let (st, ct) = euler.y.sin_cos();
    let (p, q, r) = (omega.x, omega.y, omega.z);
    Vec3::new(p + (q * sp + r * cp) * st / ct, q * cp - r * sp, (q * sp + r * cp) / ct)
}

/// Newton-Euler accelerations about the center of gravity.
pub fn rigid_eom(state: &RigidState, force: &Vec3, moment: &Vec3, thrust: f64, config: &AircraftConfig) -> Accelerations {
    let m = config.mass.mass;
    let inertia: Matrix3<f64> = config.inertia();
    let tp = Vec3::new(config.thrust.point[0], config.thrust.point[1], config.thrust.point[2]);
    let t = Vec3::new(thrust, 0.0, 0.0);
    let f = force + t + state.gravity_body(config.environment.gravity) * m;
    let mo = moment + (tp - config.cg()).cross(&t);
    let w = state.omega;
    let vdot = f / m - w.cross(&state.velocity);
    let rhs = mo - w.cross(&(inertia * w));
    let wdot = inertia.cholesky().expect("validated inertia").solve(&rhs);
    Accelerations { velocity: vdot, omega: wdot, modal: [0.0; 2] }
}

/// Modal accelerations of the plunge surrogate.
pub fn modal_eom(flex: &FlexState, generalized: [f64; 2], config: &AircraftConfig) -> [f64; 2] {
    let fx = &config.flexibility;
    if !fx.enabled {
        return [0.0; 2];
    }
    let c = 2.0 * fx.damping_ratio * (fx.modal_stiffness * fx.modal_mass).sqrt();
    std::array::from_fn(|s| (generalized[s] - c * flex.eta_rate[s] - fx.modal_stiffness * flex.eta[s]) / fx.modal_mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::config::default_config;

    fn level(v: Vec3) -> RigidState {
        RigidState { position: Vec3::zeros(), euler: Vec3::zeros(), velocity: v, omega: Vec3::zeros() }
    }

    #[test]
    fn free_fall_at_rest() {
        let c = default_config();
        let a = rigid_eom(&level(Vec3::zeros()), &Vec3::zeros(), &Vec3::zeros(), 0.0, &c);
        assert!((a.velocity - Vec3::new(0.0, 0.0, c.environment.gravity)).norm() < 1e-14);
        assert_eq!(a.omega, Vec3::zeros());
    }

    #[test]
    fn thrust_accelerates_along_body_x() {
        let mut c = default_config();
        c.environment.gravity = 0.0;
        let a = rigid_eom(&level(Vec3::zeros()), &Vec3::zeros(), &Vec3::zeros(), 150.0, &c);
        assert!((a.velocity.x - 150.0 / c.mass.mass).abs() < 1e-14);
        assert!(a.velocity.y == 0.0 && a.velocity.z == 0.0);
    }

    #[test]
    fn pitching_moment_about_principal_axis() {
        let mut c = default_config();
        c.environment.gravity = 0.0;
        let a = rigid_eom(&level(Vec3::zeros()), &Vec3::zeros(), &Vec3::new(0.0, 35.0, 0.0), 0.0, &c);
        assert!((a.omega.y - 35.0 / c.mass.inertia[1][1]).abs() < 1e-14);
        assert!(a.omega.x.abs() < 1e-16 && a.omega.z.abs() < 1e-16);
    }

    #[test]
    fn gravity_rotates_into_body_axes() {
        let mut s = level(Vec3::zeros());
        s.euler.y = 0.3;
        let g = s.gravity_body(9.0);
        assert!((g - Vec3::new(-9.0 * 0.3f64.sin(), 0.0, 9.0 * 0.3f64.cos())).norm() < 1e-14);
        s.euler = Vec3::new(0.2, 0.0, 0.0);
        let g = s.gravity_body(9.0);
        assert!((g - Vec3::new(0.0, 9.0 * 0.2f64.sin(), 9.0 * 0.2f64.cos())).norm() < 1e-14);
    }

    #[test]
    fn euler_rates_reduce_to_body_rates_when_level() {
        let r = euler_rates(&Vec3::zeros(), &Vec3::new(0.1, 0.2, 0.3));
        assert!((r - Vec3::new(0.1, 0.2, 0.3)).norm() < 1e-15);
    }
}
