//! Lowest-order virtual element operators.
//!
//! Faces and cells carry one degree of freedom per vertex. Local projectors
//! onto (scaled, centroid-centered) linear monomials are computed exactly
//! from boundary integrals; consistency matrices use the projected fields
//! and an identity-minus-projector stabilization. The element spaces are the
//! enhanced variant, so the projected face integrals stand in for exact
//! moments when cells integrate over their boundaries.
//!
//! [`assembly`] stitches the local matrices into global bulk and surface
//! operators with lumped masses, split into free and fixed (top-plane)
//! degrees of freedom.

mod assembly;
mod local;

pub use assembly::{
    assemble_boundary_mass_lumped, assemble_operators, poisson_patch_residual,
    poisson_patch_solve_error, surface_patch_residual, DiscreteOperators, ReductionMap,
};
pub use local::{cell_operators, face_operators, CellOperators, FaceOperators, VemError};
