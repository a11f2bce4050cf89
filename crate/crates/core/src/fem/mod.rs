//! Lowest-order finite element spaces with piecewise constant (symmetric) gradients.
//!
//! Every space is described by the same per-triangle data: a list of global nodes and,
//! for each node, the constant *flattened gradient* of its basis function on that
//! triangle. Scalar spaces flatten `∇φ ∈ R²`; the Kouhia–Stenberg pair flattens the
//! symmetric gradient `ε(φ)` as `[xx, xy, yx, yy]`, so that the Euclidean product of
//! flattened vectors is the Frobenius product `ε(φ_i) : ε(φ_j)`. Assembly, energies
//! and residuals are then written once for all three spaces.

mod assembly;
mod field;
mod problem;
mod space;

use thiserror::Error;

use crate::linalg::LinalgError;

pub use assembly::{assemble_divergence_constraint, assemble_load, assemble_weighted_stiffness, Coefficient};
pub use field::{broken_gradient, broken_symmetric_gradient, p0_project, P0Field};
pub use problem::Problem;
pub use space::{interpolate, interpolate_boundary, FeFunction, Space, SpaceKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("operation requires a {expected} space, got {found}")]
    WrongSpace { expected: &'static str, found: SpaceKind },
    #[error("weight on triangle {triangle} is {value}; weights must be positive and finite")]
    InvalidWeight { triangle: usize, value: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
