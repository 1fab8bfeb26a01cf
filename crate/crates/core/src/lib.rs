//! Limit energies for thin elastic shells between the linear and the
//! fully nonlinear bending regimes.
//!
//! The pipeline: a [`geometry::SurfaceChart`] discretizes the mid-surface,
//! [`isometry`] computes first-order isometries and their bending forms,
//! [`membrane`] solves for admissible membrane strains, [`functional`]
//! evaluates the limit energy, [`minimize`] minimizes it, and
//! [`gammacheck`] compares it with 3D energies of recovery sequences.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functional;
pub mod gammacheck;
pub mod geometry;
pub mod isometry;
pub mod material;
pub mod membrane;
pub mod minimize;

pub use error::{Result, ShellError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use geometry::{FormField2, Grid, SkewField, SurfaceChart, SurfaceFamily, Sym2, VectorField3};
pub use material::{ElasticModuli, Elasticity, RelaxationResult};
pub use minimize::{minimize_j, minimize_quadratic, MinimizationResult, MinimizeOptions};
pub use gammacheck::{build_ansatz, convergence_study, energy_3d, ConvergenceTable, RecoveryAnsatz};
