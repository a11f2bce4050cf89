//! Radial convex integrands `φ: [0, ∞) → [0, ∞)` and the scalar convex-analysis
//! operations built on them.
//!
//! Every family stores its parameters once and evaluates `φ`, `φ'`, `φ''`, the
//! right-continuous inverse `(φ')⁻¹`, the convex conjugate `φ*` and its derivative
//! `(φ*)' = (φ')⁻¹` in closed form wherever one exists. The remaining inverses use a
//! safeguarded Newton/bisection hybrid on a geometrically grown bracket.
//!
//! Two linearisation weights are exposed as well:
//!
//! * [`NFunction::primal_weight`] `= φ'(t)/t`, the coefficient of a primal fixed-point step;
//! * [`NFunction::dual_weight`] `= r/(φ*)'(r)`, the coefficient of the dual fixed-point step.
//!
//! Weights that would be infinite are capped at [`WEIGHT_CAP`].

use thiserror::Error;

use crate::scalar::Real;

/// Replacement for infinite linearisation weights.
pub const WEIGHT_CAP: f64 = 1e12;

const INVERSION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NFunctionError {
    #[error("argument {value} is outside the domain [0, inf)")]
    Domain { value: f64 },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("the weight phi'(t)/t is singular at t = 0 for the unregularized Bingham integrand; use a regularized model")]
    SingularWeight,
    #[error("monotone inversion of phi' did not converge for r = {r}")]
    InversionFailed { r: f64 },
}

/// Integrand families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family<T> {
    /// `φ'(s) = s (κ + s)^{p-2}`.
    ShiftedPLaplace { kappa: T, p: T },
    /// Two-material torsion design: `φ'` equals `μ2 s` below `t1`, the constant
    /// `μ2 t1` on `(t1, t2]` and `μ1 s` above `t2`, with `t1 = sqrt(2λμ1/μ2)` and
    /// `t2 = μ2 t1 / μ1`.
    OptimalDesign { lambda: T, mu1: T, mu2: T },
    /// `φ(t) = ν t² + σ_y t`. A Young function, `φ'(0) = σ_y`.
    Bingham { viscosity: T, yield_stress: T },
    /// `φ_ε(t) = ν t² + σ_y (sqrt(t² + ε²) − ε)`.
    BinghamRegularized { viscosity: T, yield_stress: T, epsilon: T },
    /// `φ(t) = t²/2`.
    Quadratic,
}

/// An integrand together with its derived thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NFunction<T> {
    family: Family<T>,
    // Optimal design plateau; unused by other families.
    t1: T,
    t2: T,
}

fn check_positive<T: Real>(name: &'static str, v: T) -> Result<(), NFunctionError> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(NFunctionError::InvalidParameter { name, value: v.to_f64().unwrap_or(f64::NAN) })
    }
}

#[inline]
fn check_arg<T: Real>(t: T) -> Result<(), NFunctionError> {
    if t.is_finite() && t >= T::zero() {
        Ok(())
    } else {
        Err(NFunctionError::Domain { value: t.to_f64().unwrap_or(f64::NAN) })
    }
}

impl<T: Real> NFunction<T> {
    fn from_family(family: Family<T>) -> Self {
        NFunction { family, t1: T::zero(), t2: T::zero() }
    }

    pub fn shifted_p_laplace(kappa: T, p: T) -> Result<Self, NFunctionError> {
        check_positive("kappa", kappa)?;
        if !(p.is_finite() && p > T::one()) {
            return Err(NFunctionError::InvalidParameter { name: "p", value: p.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(Self::from_family(Family::ShiftedPLaplace { kappa, p }))
    }

    /// Requires `μ2 ≥ μ1` so that `φ'` is non-decreasing.
    pub fn optimal_design(lambda: T, mu1: T, mu2: T) -> Result<Self, NFunctionError> {
        check_positive("lambda", lambda)?;
        check_positive("mu1", mu1)?;
        check_positive("mu2", mu2)?;
        if mu2 < mu1 {
            return Err(NFunctionError::InvalidParameter { name: "mu2", value: mu2.to_f64().unwrap_or(f64::NAN) });
        }
        let t1 = (T::lit(2.0) * lambda * mu1 / mu2).sqrt();
        let t2 = mu2 * t1 / mu1;
        Ok(NFunction { family: Family::OptimalDesign { lambda, mu1, mu2 }, t1, t2 })
    }

    pub fn bingham(viscosity: T, yield_stress: T) -> Result<Self, NFunctionError> {
        check_positive("viscosity", viscosity)?;
        if !(yield_stress.is_finite() && yield_stress >= T::zero()) {
            return Err(NFunctionError::InvalidParameter {
                name: "yield_stress",
                value: yield_stress.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self::from_family(Family::Bingham { viscosity, yield_stress }))
    }

    pub fn bingham_regularized(viscosity: T, yield_stress: T, epsilon: T) -> Result<Self, NFunctionError> {
        Self::bingham(viscosity, yield_stress)?;
        check_positive("epsilon", epsilon)?;
        Ok(Self::from_family(Family::BinghamRegularized { viscosity, yield_stress, epsilon }))
    }

    pub fn quadratic() -> Self {
        Self::from_family(Family::Quadratic)
    }

    pub fn family(&self) -> Family<T> {
        self.family
    }

    /// Plateau thresholds `(t1, t2)` of the optimal design integrand.
    pub fn plateau(&self) -> Option<(T, T)> {
        match self.family {
            Family::OptimalDesign { .. } => Some((self.t1, self.t2)),
            _ => None,
        }
    }

    /// `true` when `φ'(0) = 0`, i.e. the integrand is an N-function rather than only a Young function.
    pub fn is_n_function(&self) -> bool {
        match self.family {
            Family::Bingham { yield_stress, .. } => yield_stress == T::zero(),
            _ => true,
        }
    }

    /// Same Bingham parameters with regularization `epsilon`. `None` for other families.
    pub fn regularized(&self, epsilon: T) -> Option<Result<Self, NFunctionError>> {
        match self.family {
            Family::Bingham { viscosity, yield_stress }
            | Family::BinghamRegularized { viscosity, yield_stress, .. } => {
                Some(Self::bingham_regularized(viscosity, yield_stress, epsilon))
            }
            _ => None,
        }
    }

    /// Regularization parameter of a regularized Bingham model.
    pub fn epsilon(&self) -> Option<T> {
        match self.family {
            Family::BinghamRegularized { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }

    /// `φ(t)`, exact closed-form antiderivative of `φ'`.
    pub fn phi(&self, t: T) -> Result<T, NFunctionError> {
        check_arg(t)?;
        Ok(self.phi_unchecked(t))
    }

    pub(crate) fn phi_unchecked(&self, t: T) -> T {
        let half = T::lit(0.5);
        match self.family {
            Family::Quadratic => half * t * t,
            Family::ShiftedPLaplace { kappa, p } => shifted_phi(kappa, p, t),
            Family::OptimalDesign { mu1, mu2, .. } => {
                let (t1, t2) = (self.t1, self.t2);
                if t <= t1 {
                    half * mu2 * t * t
                } else if t <= t2 {
                    half * mu2 * t1 * t1 + mu2 * t1 * (t - t1)
                } else {
                    half * mu2 * t1 * t1 + mu2 * t1 * (t2 - t1) + half * mu1 * (t - t2) * (t + t2)
                }
            }
            Family::Bingham { viscosity, yield_stress } => viscosity * t * t + yield_stress * t,
            Family::BinghamRegularized { viscosity, yield_stress, epsilon } => {
                // sqrt(t² + ε²) − ε without cancellation
                let root = t.hypot(epsilon);
                viscosity * t * t + yield_stress * t * t / (root + epsilon)
            }
        }
    }

    /// `φ'(t)`, right-continuous.
    pub fn phi_prime(&self, t: T) -> Result<T, NFunctionError> {
        check_arg(t)?;
        Ok(self.phi_prime_unchecked(t))
    }

    pub(crate) fn phi_prime_unchecked(&self, t: T) -> T {
        match self.family {
            Family::Quadratic => t,
            Family::ShiftedPLaplace { kappa, p } => t * (kappa + t).powf(p - T::lit(2.0)),
            Family::OptimalDesign { mu1, mu2, .. } => {
                if t <= self.t1 {
                    mu2 * t
                } else if t <= self.t2 {
                    mu2 * self.t1
                } else {
                    mu1 * t
                }
            }
            Family::Bingham { viscosity, yield_stress } => T::lit(2.0) * viscosity * t + yield_stress,
            Family::BinghamRegularized { viscosity, yield_stress, epsilon } => {
                T::lit(2.0) * viscosity * t + yield_stress * t / t.hypot(epsilon)
            }
        }
    }

    /// `φ''(t)` (right derivative where `φ'` has kinks).
    pub fn phi_second(&self, t: T) -> Result<T, NFunctionError> {
        check_arg(t)?;
        Ok(self.phi_second_unchecked(t))
    }

    pub(crate) fn phi_second_unchecked(&self, t: T) -> T {
        match self.family {
            Family::Quadratic => T::one(),
            Family::ShiftedPLaplace { kappa, p } => {
                (kappa + t).powf(p - T::lit(3.0)) * (kappa + (p - T::one()) * t)
            }
            Family::OptimalDesign { mu1, mu2, .. } => {
                if t < self.t1 {
                    mu2
                } else if t < self.t2 {
                    T::zero()
                } else {
                    mu1
                }
            }
            Family::Bingham { viscosity, .. } => T::lit(2.0) * viscosity,
            Family::BinghamRegularized { viscosity, yield_stress, epsilon } => {
                let q = t.hypot(epsilon);
                T::lit(2.0) * viscosity + yield_stress * epsilon * epsilon / (q * q * q)
            }
        }
    }

    /// Right-continuous inverse `sup{ s ≥ 0 : φ'(s) ≤ r }`, with `sup ∅ = 0`.
    pub fn phi_prime_inverse(&self, r: T) -> Result<T, NFunctionError> {
        check_arg(r)?;
        match self.family {
            Family::Quadratic => Ok(r),
            Family::OptimalDesign { mu1, mu2, .. } => {
                if r < mu2 * self.t1 {
                    Ok(r / mu2)
                } else {
                    Ok(r / mu1)
                }
            }
            Family::Bingham { viscosity, yield_stress } => {
                Ok(((r - yield_stress) / (T::lit(2.0) * viscosity)).max(T::zero()))
            }
            Family::ShiftedPLaplace { kappa, p } => {
                if p == T::lit(2.0) {
                    return Ok(r);
                }
                if p == T::lit(3.0) {
                    // s² + κ s − r = 0
                    let disc = (kappa * kappa + T::lit(4.0) * r).sqrt();
                    return Ok(T::lit(2.0) * r / (kappa + disc));
                }
                let guess = (r * kappa.powf(T::lit(2.0) - p)).min(r.powf(T::one() / (p - T::one())));
                self.invert_increasing(r, guess)
            }
            Family::BinghamRegularized { viscosity, .. } => {
                let guess = r / (T::lit(2.0) * viscosity);
                self.invert_increasing(r, guess)
            }
        }
    }

    /// Safeguarded Newton/bisection for strictly increasing, continuous `φ'` with `φ'(0) = 0`.
    fn invert_increasing(&self, r: T, guess: T) -> Result<T, NFunctionError> {
        if r == T::zero() {
            return Ok(T::zero());
        }
        let tol = T::tol(1e-13, 16.0);
        let mut lo = T::zero();
        let mut hi = if guess > T::zero() && guess.is_finite() { guess } else { T::one() };
        let mut grow = 0;
        while self.phi_prime_unchecked(hi) <= r {
            lo = hi;
            hi = hi * T::lit(2.0);
            grow += 1;
            if grow > 2000 || !hi.is_finite() {
                return Err(NFunctionError::InversionFailed { r: r.to_f64().unwrap_or(f64::NAN) });
            }
        }
        let mut s = T::lit(0.5) * (lo + hi);
        for _ in 0..INVERSION_MAX_ITER {
            let g = self.phi_prime_unchecked(s) - r;
            if g == T::zero() {
                return Ok(s);
            }
            if g > T::zero() {
                hi = s;
            } else {
                lo = s;
            }
            if hi - lo <= tol * hi {
                return Ok(T::lit(0.5) * (lo + hi));
            }
            let d = self.phi_second_unchecked(s);
            let step = g / d;
            let newton = s - step;
            if d > T::zero() && newton.is_finite() && newton > lo && newton < hi {
                s = newton;
                if step.abs() <= tol * s {
                    return Ok(s);
                }
            } else {
                s = T::lit(0.5) * (lo + hi);
            }
        }
        Err(NFunctionError::InversionFailed { r: r.to_f64().unwrap_or(f64::NAN) })
    }

    /// Convex conjugate `φ*(r) = sup_s (r s − φ(s))`.
    pub fn conjugate(&self, r: T) -> Result<T, NFunctionError> {
        check_arg(r)?;
        match self.family {
            Family::Quadratic => Ok(T::lit(0.5) * r * r),
            Family::Bingham { viscosity, yield_stress } => {
                let excess = (r - yield_stress).max(T::zero());
                Ok(excess * excess / (T::lit(4.0) * viscosity))
            }
            _ => {
                let t = self.phi_prime_inverse(r)?;
                // The maximiser is attained at t; clamp roundoff below zero.
                Ok((r * t - self.phi_unchecked(t)).max(T::zero()))
            }
        }
    }

    /// `(φ*)'(r) = (φ')⁻¹(r)`.
    pub fn conjugate_prime(&self, r: T) -> Result<T, NFunctionError> {
        self.phi_prime_inverse(r)
    }

    /// `φ'(t)/t`, extended to `t = 0` by its limit.
    pub fn primal_weight(&self, t: T) -> Result<T, NFunctionError> {
        check_arg(t)?;
        let cap = T::lit(WEIGHT_CAP);
        let w = match self.family {
            Family::Quadratic => T::one(),
            Family::ShiftedPLaplace { kappa, p } => (kappa + t).powf(p - T::lit(2.0)),
            Family::OptimalDesign { mu1, mu2, .. } => {
                if t <= self.t1 {
                    mu2
                } else if t <= self.t2 {
                    mu2 * self.t1 / t
                } else {
                    mu1
                }
            }
            Family::Bingham { viscosity, yield_stress } => {
                if t == T::zero() {
                    if yield_stress > T::zero() {
                        return Err(NFunctionError::SingularWeight);
                    }
                    T::lit(2.0) * viscosity
                } else {
                    T::lit(2.0) * viscosity + yield_stress / t
                }
            }
            Family::BinghamRegularized { viscosity, yield_stress, epsilon } => {
                T::lit(2.0) * viscosity + yield_stress / t.hypot(epsilon)
            }
        };
        Ok(w.min(cap))
    }

    /// `r/(φ*)'(r)`, extended to `r = 0` by the limit of `φ'(t)/t` at zero and capped
    /// on the zero plateau of `(φ*)'`.
    pub fn dual_weight(&self, r: T) -> Result<T, NFunctionError> {
        check_arg(r)?;
        let cap = T::lit(WEIGHT_CAP);
        if let Family::Quadratic = self.family {
            return Ok(T::one());
        }
        let t = self.conjugate_prime(r)?;
        if t == T::zero() {
            return Ok(match self.family {
                Family::ShiftedPLaplace { kappa, p } => kappa.powf(p - T::lit(2.0)),
                Family::OptimalDesign { mu2, .. } => mu2,
                Family::BinghamRegularized { viscosity, yield_stress, epsilon } => {
                    T::lit(2.0) * viscosity + yield_stress / epsilon
                }
                Family::Bingham { viscosity, yield_stress } => {
                    if yield_stress > T::zero() {
                        cap
                    } else {
                        T::lit(2.0) * viscosity
                    }
                }
                Family::Quadratic => T::one(),
            }
            .min(cap));
        }
        Ok((r / t).min(cap))
    }
}

/// `∫_0^t s (κ+s)^{p-2} ds`.
fn shifted_phi<T: Real>(kappa: T, p: T, t: T) -> T {
    let x = t / kappa;
    if x <= T::lit(0.25) {
        // κ^p Σ_k binom(p-2, k) x^{k+2} / (k+2)
        let mut coeff = T::one();
        let mut xp = x * x;
        let mut sum = T::zero();
        for k in 0..400 {
            let term = coeff * xp / T::from_count(k + 2);
            sum += term;
            if term.abs() <= T::epsilon() * sum.abs() * T::lit(0.25) {
                break;
            }
            coeff = coeff * (p - T::lit(2.0) - T::from_count(k)) / T::from_count(k + 1);
            if coeff == T::zero() {
                break;
            }
            xp = xp * x;
        }
        kappa.powf(p) * sum
    } else {
        let u = kappa + t;
        let pm1 = p - T::one();
        u.powf(pm1) * (u / p - kappa / pm1) + kappa.powf(p) / (p * pm1)
    }
}
