//! Finite element minimisation of convex gradient energies
//! `J(v) = ∫ φ(|∇v|) − f v` with guaranteed bounds for the iteration error.
//!
//! For a discrete iterate `v` and any stress field `τ` satisfying the discrete
//! equilibrium constraint `∫ τ·∇_h w = ∫ f w` for all discrete `w`, the quantity
//! `J(v) + J*(τ)` bounds `J(v) − min J` from above. The fixed-point, gradient
//! descent and Newton iterations in [`solver`] each produce such a `τ` as a
//! byproduct, so every iterate comes with a certificate.
//!
//! Modules:
//!
//! * [`nfunction`] integrand families and scalar convex analysis;
//! * [`mesh`] structured triangulations with newest-vertex bisection;
//! * [`fem`] P1, Crouzeix–Raviart and Kouhia–Stenberg spaces and assembly;
//! * [`linalg`] sparse LDLᵀ, preconditioned CG and saddle-point solves;
//! * [`solver`] primal/dual Kačanov, gradient descent, Newton and the iteration driver;
//! * [`gub`] energies, the guaranteed upper bound and regularization control;
//! * [`experiments`] configurable end-to-end runs writing CSV histories.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod experiments;
pub mod fem;
pub mod gub;
pub mod linalg;
pub mod mesh;
pub mod nfunction;
pub mod scalar;
pub mod solver;

pub use scalar::Real;

pub type NFunction64 = nfunction::NFunction<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type Space64 = fem::Space<f64>;
pub type Problem64 = fem::Problem<f64>;
pub type FeFunction64 = fem::FeFunction<f64>;
pub type P0Field64 = fem::P0Field<f64>;
pub type CsrMatrix64 = linalg::CsrMatrix<f64>;
pub type IterationRecord64 = solver::IterationRecord<f64>;
pub type EnergyReport64 = gub::EnergyReport<f64>;

pub type NFunction32 = nfunction::NFunction<f32>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type Space32 = fem::Space<f32>;
pub type Problem32 = fem::Problem<f32>;
