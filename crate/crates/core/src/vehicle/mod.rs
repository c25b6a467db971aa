//! Aircraft definition and the panel lattice for any morphing state.

pub mod config;
pub mod lattice;

pub use config::{
    default_config, elastic_config, freeze_morphing, load_config, load_config_file, refine_lattice,
    serialize_config,
    stiffen_config, AircraftConfig, ComponentTag, PowerModel, Side, SurfaceId,
};
pub use lattice::{morph_geometry, rectangular_wing, reference_lattice, ComponentLattice, HingeLine, LatticeGeometry, Panel};
