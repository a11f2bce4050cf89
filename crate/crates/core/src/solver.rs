//! Iteration schemes and the driver that certifies every iterate.
//!
//! Each step maps the current iterate to `(u_{n+1}, σ_{n+1})` where `σ_{n+1}` is
//! discretely equilibrated, so `J(u_{n+1}) + J*(σ_{n+1})` bounds the energy error.
//!
//! | scheme | linear problem | stress |
//! |---|---|---|
//! | primal Kačanov | weight `φ'(|∇u_n|)/|∇u_n|` | `w ∇u_{n+1}` |
//! | dual Kačanov | weight `|σ_n|/(φ*)'(|σ_n|)` | `w ∇u_{n+1}` |
//! | gradient descent | unit weight, residual load | `w ∇u_n − ∇g` |
//! | Newton | `w I + (φ'' − w) n nᵀ` | `C ∇δ + w ∇u_n` |

use thiserror::Error;

use crate::fem::{Coefficient, FeFunction, FemError, P0Field, Problem};
use crate::gub::{self, GubError};
use crate::nfunction::{Family, NFunction, NFunctionError};
use crate::scalar::{dot, Real};

const ARMIJO_SLOPE: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Lower bound for `φ''` relative to `φ'/t` in the Newton coefficient.
const CURVATURE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("line search stagnated after {halvings} halvings")]
    Stagnation { halvings: usize },
    #[error("invalid controls: {0}")]
    InvalidControls(String),
    #[error(transparent)]
    NFunction(#[from] NFunctionError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Gub(#[from] GubError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    PrimalKacanov,
    DualKacanov,
    GradientDescent,
    Newton,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::PrimalKacanov => "primal-kacanov",
            Scheme::DualKacanov => "dual-kacanov",
            Scheme::GradientDescent => "gradient-descent",
            Scheme::Newton => "newton",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "primal-kacanov" | "kacanov" => Ok(Scheme::PrimalKacanov),
            "dual-kacanov" => Ok(Scheme::DualKacanov),
            "gradient-descent" => Ok(Scheme::GradientDescent),
            "newton" => Ok(Scheme::Newton),
            _ => Err(format!("unknown scheme '{s}'")),
        }
    }
}

/// Regularization of a Bingham model along the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonPolicy<T> {
    /// Use the model as given.
    None,
    /// `ε_n = 1/n`.
    FixedSequence,
    /// Start from the value and halve whenever `GUB/GUB_ε > 100`.
    Adaptive(T),
    Constant(T),
}

/// `ε` for step `n ≥ 1` under the fixed `1/n` schedule, or the adaptive update of
/// `previous` given the latest ratio.
pub fn bingham_epsilon_schedule<T: Real>(policy: EpsilonPolicy<T>, n: usize, previous: T, ratio: Option<T>) -> T {
    match policy {
        EpsilonPolicy::FixedSequence => T::one() / T::from_count(n.max(1)),
        EpsilonPolicy::Adaptive(_) => match ratio {
            Some(r) => gub::adaptive_epsilon_policy(previous, r),
            None => previous,
        },
        EpsilonPolicy::Constant(e) => e,
        EpsilonPolicy::None => previous,
    }
}

#[derive(Debug, Clone)]
pub struct Controls<T> {
    pub max_iter: usize,
    /// Stop once `gub ≤ tol`.
    pub tol: T,
    pub epsilon: EpsilonPolicy<T>,
    /// Keep `u_n` and `σ_n` on every record, not only the last one.
    pub keep_fields: bool,
    pub initial_u: Option<FeFunction<T>>,
    pub initial_sigma: Option<P0Field<T>>,
}

impl<T: Real> Default for Controls<T> {
    fn default() -> Self {
        Controls {
            max_iter: 100,
            tol: T::zero(),
            epsilon: EpsilonPolicy::None,
            keep_fields: false,
            initial_u: None,
            initial_sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub n: usize,
    pub u: Option<FeFunction<T>>,
    pub sigma: Option<P0Field<T>>,
    /// `J(u_n)` for the model passed to [`iterate`].
    pub primal: T,
    /// `J*(σ_n)` for the model passed to [`iterate`].
    pub dual: T,
    pub gub: T,
    pub feasibility: T,
    /// Regularization used for step `n`.
    pub epsilon: Option<T>,
    /// `GUB/GUB_ε` on `(u_n, σ_n)` when a regularization is active.
    pub ratio: Option<T>,
    /// Accepted line-search step (1 for the Kačanov schemes).
    pub step: T,
}

/// Output of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub u: FeFunction<T>,
    pub sigma: P0Field<T>,
    pub step: T,
}

fn weights<T: Real, F: Fn(T) -> Result<T, NFunctionError>>(g: &P0Field<T>, w: F) -> Result<Vec<T>, NFunctionError> {
    (0..g.len()).map(|t| w(g.norm_at(t))).collect()
}

fn weighted_solve<T: Real>(problem: &Problem<T>, w: &[T]) -> Result<Step<T>, SolverError> {
    let coef = Coefficient::Scalar(w);
    let u = problem.solve(coef, &problem.rhs_with_lift(coef))?;
    let sigma = problem.total_gradient(&u).scaled(w);
    Ok(Step { u, sigma, step: T::one() })
}

/// One primal Kačanov step from `u_n`.
pub fn kacanov_step<T: Real>(model: &NFunction<T>, problem: &Problem<T>, u_n: &FeFunction<T>) -> Result<Step<T>, SolverError> {
    let w = weights(&problem.total_gradient(u_n), |t| model.primal_weight(t))?;
    weighted_solve(problem, &w)
}

/// One dual Kačanov step from `σ_n`.
pub fn dual_kacanov_step<T: Real>(model: &NFunction<T>, problem: &Problem<T>, sigma_n: &P0Field<T>) -> Result<Step<T>, SolverError> {
    let w = weights(sigma_n, |r| model.dual_weight(r))?;
    weighted_solve(problem, &w)
}

/// Backtracking on `J` along `u + s d`, where `slope = J'(u)·d < 0`.
fn armijo<T: Real>(
    model: &NFunction<T>,
    problem: &Problem<T>,
    u: &FeFunction<T>,
    d: &FeFunction<T>,
    slope: T,
) -> Result<(FeFunction<T>, T), SolverError> {
    let j0 = gub::primal_energy(model, problem, u)?;
    let full = u.axpy(T::one(), d);
    if slope.abs() <= T::lit(1e-14) * (T::one() + j0.abs()) {
        return Ok((full, T::one()));
    }
    let c = T::lit(ARMIJO_SLOPE);
    let mut s = T::one();
    for _ in 0..=MAX_HALVINGS {
        let trial = u.axpy(s, d);
        let j = gub::primal_energy(model, problem, &trial)?;
        if j <= j0 + c * s * slope {
            return Ok((trial, s));
        }
        s = s * T::lit(0.5);
    }
    Err(SolverError::Stagnation { halvings: MAX_HALVINGS })
}

/// One gradient descent step from `u_n`: the unit-weight Riesz representative `g` of
/// the energy residual, then Armijo backtracking along `−g`.
pub fn gradient_descent_step<T: Real>(
    model: &NFunction<T>,
    problem: &Problem<T>,
    u_n: &FeFunction<T>,
) -> Result<Step<T>, SolverError> {
    let grad = problem.total_gradient(u_n);
    let w = weights(&grad, |t| model.primal_weight(t))?;
    let flux = grad.scaled(&w);
    let residual = problem.equilibrium_residual(&flux);
    let unit = vec![T::one(); problem.n_triangles()];
    let g = problem.solve(Coefficient::Scalar(&unit), &residual)?;
    let sigma = flux.axpy(-T::one(), &problem.space().gradient(&g));
    let descent = FeFunction { coefficients: g.coefficients.iter().map(|&x| -x).collect(), boundary: None };
    let slope = dot(&residual, &descent.coefficients);
    let (u, step) = armijo(model, problem, u_n, &descent, slope)?;
    Ok(Step { u, sigma, step })
}

/// One damped Newton step from `u_n`.
pub fn newton_step<T: Real>(model: &NFunction<T>, problem: &Problem<T>, u_n: &FeFunction<T>) -> Result<Step<T>, SolverError> {
    let grad = problem.total_gradient(u_n);
    let nt = problem.n_triangles();
    let dim = grad.dim();
    let mut w = Vec::with_capacity(nt);
    let mut extra = Vec::with_capacity(nt);
    let mut direction = P0Field::zeros(nt, dim);
    for t in 0..nt {
        let s = grad.norm_at(t);
        let wt = model.primal_weight(s)?;
        w.push(wt);
        if s > T::zero() && wt < T::lit(crate::nfunction::WEIGHT_CAP) {
            let curvature = model.phi_second(s)?;
            if !(curvature >= T::zero()) {
                return Err(SolverError::Fem(FemError::InvalidWeight {
                    triangle: t,
                    value: curvature.to_f64().unwrap_or(f64::NAN),
                }));
            }
            extra.push(curvature.max(T::lit(CURVATURE_FLOOR) * wt) - wt);
            for (d, &g) in direction.value_mut(t).iter_mut().zip(grad.value(t)) {
                *d = g / s;
            }
        } else {
            extra.push(T::zero());
        }
    }
    let coef = Coefficient::RankOne { weight: &w, extra: &extra, direction: &direction };
    let flux = grad.scaled(&w);
    let residual = problem.equilibrium_residual(&flux);
    let rhs: Vec<T> = residual.iter().map(|&r| -r).collect();
    let delta = problem.solve(coef, &rhs)?;
    let sigma = problem.apply_coefficient(coef, &problem.space().gradient(&delta)).axpy(T::one(), &flux);
    let slope = dot(&residual, &delta.coefficients);
    let (u, step) = armijo(model, problem, u_n, &delta, slope)?;
    Ok(Step { u, sigma, step })
}

fn is_unregularized_bingham<T: Real>(model: &NFunction<T>) -> bool {
    matches!(model.family(), Family::Bingham { .. })
}

/// Runs `scheme` from `u_0 = 0`, `σ_0 = 0` (or the initial iterates in `controls`)
/// and certifies every iterate.
///
/// Records start at `n = 1`; the initial stress is in general not equilibrated. With
/// an epsilon policy other than [`EpsilonPolicy::None`] and a Bingham model, step `n`
/// uses the regularized model `φ_{ε_n}` while energies and bounds refer to `model`.
pub fn iterate<T: Real>(
    scheme: Scheme,
    model: &NFunction<T>,
    problem: &Problem<T>,
    controls: &Controls<T>,
) -> Result<Vec<IterationRecord<T>>, SolverError> {
    if controls.max_iter == 0 {
        return Err(SolverError::InvalidControls("max_iter must be positive".into()));
    }
    let regularize = !matches!(controls.epsilon, EpsilonPolicy::None) && model.regularized(T::one()).is_some();
    if is_unregularized_bingham(model) && !regularize && scheme != Scheme::DualKacanov {
        return Err(NFunctionError::SingularWeight.into());
    }
    let mut epsilon = match controls.epsilon {
        EpsilonPolicy::Adaptive(e0) | EpsilonPolicy::Constant(e0) => e0,
        _ => T::one(),
    };
    if regularize && !(epsilon > T::zero()) {
        return Err(SolverError::InvalidControls("epsilon must be positive".into()));
    }

    let mut u = controls.initial_u.clone().unwrap_or_else(|| problem.zero_function());
    let mut sigma = controls
        .initial_sigma
        .clone()
        .unwrap_or_else(|| P0Field::zeros(problem.n_triangles(), problem.gradient_dim()));
    let mut records: Vec<IterationRecord<T>> = Vec::new();
    let mut last_ratio = None;

    for n in 1..=controls.max_iter {
        if regularize {
            epsilon = bingham_epsilon_schedule(controls.epsilon, n, epsilon, last_ratio);
        }
        let step_model = if regularize { model.regularized(epsilon).expect("bingham")? } else { *model };
        let step = match scheme {
            Scheme::PrimalKacanov => kacanov_step(&step_model, problem, &u)?,
            Scheme::DualKacanov => dual_kacanov_step(&step_model, problem, &sigma)?,
            Scheme::GradientDescent => gradient_descent_step(&step_model, problem, &u)?,
            Scheme::Newton => newton_step(&step_model, problem, &u)?,
        };
        u = step.u;
        sigma = step.sigma;
        let report = gub::guaranteed_upper_bound(model, problem, &u, &sigma)?;
        let ratio = if regularize {
            let gub_eps = gub::primal_energy(&step_model, problem, &u)? + gub::dual_energy(&step_model, problem, &sigma)?;
            gub::ratio_of(report.gub, gub_eps).ok()
        } else {
            None
        };
        last_ratio = ratio;
        let keep = controls.keep_fields;
        records.push(IterationRecord {
            n,
            u: keep.then(|| u.clone()),
            sigma: keep.then(|| sigma.clone()),
            primal: report.primal,
            dual: report.dual,
            gub: report.gub,
            feasibility: report.feasibility,
            epsilon: regularize.then_some(epsilon),
            ratio,
            step: step.step,
        });
        if report.gub <= controls.tol {
            break;
        }
    }
    if let Some(last) = records.last_mut() {
        last.u = Some(u);
        last.sigma = Some(sigma);
    }
    Ok(records)
}
