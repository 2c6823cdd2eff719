//! Bulk-surface virtual element simulator for an electrodeposition model.
//!
//! The crate builds graded polyhedral meshes of the cube `[0,L]^3`, assembles
//! lowest-order virtual element operators in the bulk and on the bottom face
//! `Gamma = [0,L]^2 x {0}`, and integrates a four-field reaction-diffusion
//! system in time: two bulk species (an adsorbate precursor `b` and a bath
//! additive `q`) coupled through boundary fluxes to two surface fields (metal
//! coverage `eta` and adsorbate coverage `theta`). The surface pair alone is
//! the classical two-variable electrodeposition model, available as a 2-D
//! comparison mode on the same surface grid.
//!
//! Module map:
//! - [`mesh`]: graded/uniform polyhedral meshes, surface extraction, quality
//!   reporting and a binary mesh format.
//! - [`vem`]: local virtual element projectors and matrices, global assembly,
//!   mass lumping and Dirichlet elimination.
//! - [`kinetics`]: model parameters, reaction terms, equilibrium Jacobians and
//!   the linear stability test.
//! - [`solver`]: IMEX Euler time stepping with factorization reuse, increment
//!   tracking and pattern diagnostics.
//! - [`cli_io`]: experiment presets, run configuration, CSV/VTK writers and
//!   run comparison. The `bsdib` binary wires these into a CLI.

// Guards written as `!(x > 0.0)` must stay negated: they reject NaN, which
// the suggested direct comparison would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Indexed loops over coordinates and vertex ids mirror the math they
// implement; iterator rewrites obscure the indexing they share.
#![allow(clippy::needless_range_loop)]

pub mod cli_io;
pub mod kinetics;
pub mod linalg;
pub mod mesh;
pub mod solver;
pub mod vem;
