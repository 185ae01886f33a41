//! Temperature-dependent Allen-Cahn phase segregation: a parabolic equation
//! for the order parameter `ρ ∈ (0,1)`, a pointwise ODE for `ξ` solved in
//! the maximal sense, and a pointwise branch-selected equation for the
//! temperature `θ`, coupled through the fixed-point map `θ ↦ F2(F1(θ))`.

// Negated comparisons are used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ac_stepper;
pub mod driver;
pub mod driver_io;
pub mod error;
pub mod grid;
pub mod initial_data;
pub mod model;
pub mod series;
pub mod theta_map;
pub mod xi_transport;

pub use error::{Error, Result};
pub use grid::{Grid, Norms, ScalarField};
pub use model::{BranchGeometry, ModelParams, PotentialSpec};
pub use series::FieldSeries;
