//! Morphing-winglet aircraft simulation and trajectory optimization.
//!
//! The pipeline runs from an [`vehicle::AircraftConfig`] through an unsteady vortex-lattice
//! aerodynamic model ([`aero`]) and 6-DOF rigid-body dynamics ([`flightdyn`]) to trim
//! ([`trim`]), hinge-moment actuation cost ([`actuation`]) and direct-shooting trajectory
//! optimization ([`ocp`]). [`io`] persists runs and hosts the command-line front end.
//!
//! Axes: x forward, y right, z down. Altitude is `h = -z`.

pub mod actuation;
pub mod aero;
pub mod error;
pub mod flightdyn;
pub mod io;
pub mod ocp;
pub mod trim;
pub mod vehicle;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
