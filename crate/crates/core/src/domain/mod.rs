//! Box geometry, staggered lattice, stencils, material tensors and the assumption checks.

pub mod assumptions;
pub mod grid;
pub mod mass;
pub mod materials;
pub mod multiplier;
pub mod stencil;

pub use assumptions::{
    check_assumption_geometry, check_assumption_materials, CheckOutcome, MaterialReport,
};
pub use grid::{build_grid, BoundarySample, BoxDomain, Shape, Vec3, YeeGrid};
pub use mass::MaterialMass;
pub use materials::{Mat3, MaterialPreset, TensorField};
pub use multiplier::{multiplier_field, MultiplierField};
pub use stencil::{EdgeField, FaceField, StaggeredField};
