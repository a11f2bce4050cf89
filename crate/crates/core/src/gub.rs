//! Discrete energies and the guaranteed upper bound for the iteration error.
//!
//! For `v` in the discrete space and `τ` piecewise constant with `∫ τ·∇_h w = ∫ f w`
//! for all discrete `w`, discrete duality gives
//!
//! ```text
//! J(v) − min J  ≤  J(v) + J*(τ)  =:  GUB
//! ```
//!
//! with `J*(τ) = Σ_T |T| φ*(|τ_T|)` (minus `τ : ε(lift)` for problems with a boundary
//! lift). [`guaranteed_upper_bound`] refuses to report a bound for an infeasible `τ`.

use thiserror::Error;

use crate::fem::{FeFunction, FemError, P0Field, Problem};
use crate::nfunction::{NFunction, NFunctionError};
use crate::scalar::{pairwise_sum, Real};

/// Largest feasibility residual accepted by [`guaranteed_upper_bound`].
pub const FEASIBILITY_GATE: f64 = 1e-6;

/// `GUB/GUB_ε` above this value halves the regularization parameter.
pub const RATIO_THRESHOLD: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GubError {
    #[error("dual field is not feasible: residual {residual:e} exceeds {gate:e}; the bound would not be guaranteed")]
    Infeasible { residual: f64, gate: f64 },
    #[error("efficiency index undefined: J(v) − j_ref = {gap:e} is at reference accuracy")]
    UndefinedIndex { gap: f64 },
    #[error("regularized bound {value:e} is not positive; the ratio is undefined")]
    DegenerateRatio { value: f64 },
    #[error(transparent)]
    NFunction(#[from] NFunctionError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport<T> {
    pub primal: T,
    pub dual: T,
    /// `primal + dual`.
    pub gub: T,
    pub feasibility: T,
    pub efficiency: Option<T>,
    /// `GUB/GUB_ε` when a regularized model was supplied.
    pub ratio: Option<T>,
}

/// `Σ_T |T| φ(|g_T|)`.
pub fn integrate_phi<T: Real>(model: &NFunction<T>, areas: &[T], g: &P0Field<T>) -> Result<T, GubError> {
    let terms: Result<Vec<T>, NFunctionError> =
        (0..g.len()).map(|t| model.phi(g.norm_at(t)).map(|p| areas[t] * p)).collect();
    Ok(pairwise_sum(&terms?))
}

/// `Σ_T |T| φ*(|τ_T|)`.
pub fn integrate_conjugate<T: Real>(model: &NFunction<T>, areas: &[T], tau: &P0Field<T>) -> Result<T, GubError> {
    let terms: Result<Vec<T>, NFunctionError> =
        (0..tau.len()).map(|t| model.conjugate(tau.norm_at(t)).map(|p| areas[t] * p)).collect();
    Ok(pairwise_sum(&terms?))
}

/// `J(v) = Σ_T |T| φ(|∇_h(v + lift)|) − ∫ f v`.
pub fn primal_energy<T: Real>(model: &NFunction<T>, problem: &Problem<T>, v: &FeFunction<T>) -> Result<T, GubError> {
    let g = problem.total_gradient(v);
    Ok(integrate_phi(model, problem.mesh().areas(), &g)? - problem.load_functional(v))
}

/// `J*(τ) = Σ_T |T| (φ*(|τ_T|) − τ_T : ∇_h lift)`.
pub fn dual_energy<T: Real>(model: &NFunction<T>, problem: &Problem<T>, tau: &P0Field<T>) -> Result<T, GubError> {
    let areas = problem.mesh().areas();
    let base = integrate_conjugate(model, areas, tau)?;
    Ok(match problem.lift_gradient() {
        None => base,
        Some(lg) => {
            let coupling: Vec<T> = tau.inner(lg).into_iter().zip(areas).map(|(x, &a)| a * x).collect();
            base - pairwise_sum(&coupling)
        }
    })
}

/// Energies and `GUB = J(v) + J*(τ)` after checking feasibility of `τ`.
pub fn guaranteed_upper_bound<T: Real>(
    model: &NFunction<T>,
    problem: &Problem<T>,
    v: &FeFunction<T>,
    tau: &P0Field<T>,
) -> Result<EnergyReport<T>, GubError> {
    let feasibility = problem.feasibility_residual(tau)?;
    if !(feasibility <= T::lit(FEASIBILITY_GATE)) {
        return Err(GubError::Infeasible { residual: feasibility.to_f64().unwrap_or(f64::NAN), gate: FEASIBILITY_GATE });
    }
    let primal = primal_energy(model, problem, v)?;
    let dual = dual_energy(model, problem, tau)?;
    Ok(EnergyReport { primal, dual, gub: primal + dual, feasibility, efficiency: None, ratio: None })
}

/// `GUB / (J(v) − j_ref)`.
pub fn efficiency_index<T: Real>(gub: T, j_v: T, j_ref: T) -> Result<T, GubError> {
    let gap = j_v - j_ref;
    if !(gap > T::lit(1e-14)) {
        return Err(GubError::UndefinedIndex { gap: gap.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(gub / gap)
}

/// `(J(v) + J*(τ)) / (J_ε(v) + J_ε*(τ))` for the same pair `(v, τ)`.
pub fn regularization_ratio<T: Real>(
    model: &NFunction<T>,
    model_eps: &NFunction<T>,
    problem: &Problem<T>,
    v: &FeFunction<T>,
    tau: &P0Field<T>,
) -> Result<T, GubError> {
    let gub = primal_energy(model, problem, v)? + dual_energy(model, problem, tau)?;
    let gub_eps = primal_energy(model_eps, problem, v)? + dual_energy(model_eps, problem, tau)?;
    ratio_of(gub, gub_eps)
}

pub(crate) fn ratio_of<T: Real>(gub: T, gub_eps: T) -> Result<T, GubError> {
    if !(gub_eps > T::zero()) || gub_eps <= T::epsilon() * gub.abs() {
        return Err(GubError::DegenerateRatio { value: gub_eps.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(gub / gub_eps)
}

/// Halves `epsilon` when `ratio` exceeds [`RATIO_THRESHOLD`].
pub fn adaptive_epsilon_policy<T: Real>(epsilon: T, ratio: T) -> T {
    if ratio > T::lit(RATIO_THRESHOLD) {
        epsilon * T::lit(0.5)
    } else {
        epsilon
    }
}
