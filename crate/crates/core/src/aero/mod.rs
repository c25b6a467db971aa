//! Unsteady vortex-lattice aerodynamics.

pub mod biot_savart;
pub mod loads;
pub mod model;
pub mod uvlm;

pub use loads::{compute_loads, AeroLoads};
pub use model::{assemble_influence, AeroModel, InfluenceMatrix, StepSystem, SteadySystem, WakeLayout};
pub use uvlm::{AeroState, Kinematics, UvlmSolver};
