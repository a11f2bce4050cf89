use std::sync::OnceLock;

use super::assembly::StiffnessPattern;
use super::{assemble_divergence_constraint, assemble_load, Coefficient, FeFunction, FemError, P0Field, Space, SpaceKind};
use crate::linalg::{solve_saddle_factored, solve_with_factor, CsrMatrix, LdlFactor, LdlSymbolic, LinalgError, SaddleOptions};
use crate::scalar::{norm2, Real};

/// A discrete space with a constant right-hand side, an optional boundary lift and
/// cached structural data for repeated linear solves.
///
/// The unknown of every scheme is the homogeneous part `u`; the discrete velocity or
/// state is `u + lift`. On the Kouhia–Stenberg space `u` is constrained to have zero
/// integral divergence on every triangle; the lift is not.
#[derive(Debug)]
pub struct Problem<T> {
    space: Space<T>,
    f: T,
    load: Vec<T>,
    lift: Option<FeFunction<T>>,
    lift_gradient: Option<P0Field<T>>,
    pattern: OnceLock<StiffnessPattern<T>>,
    symbolic: OnceLock<LdlSymbolic>,
    constraint: OnceLock<CsrMatrix<T>>,
    projector: OnceLock<Result<RangeProjector<T>, LinalgError>>,
    saddle: SaddleOptions<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(space: Space<T>, f: T) -> Self {
        let load = assemble_load(&space, f);
        Problem {
            space,
            f,
            load,
            lift: None,
            lift_gradient: None,
            pattern: OnceLock::new(),
            symbolic: OnceLock::new(),
            constraint: OnceLock::new(),
            projector: OnceLock::new(),
            saddle: SaddleOptions::default(),
        }
    }

    /// Problem for the state `u + lift` with homogeneous `u`. Any discrete extension of
    /// the boundary data works as `lift`; [`interpolate_boundary`](super::interpolate_boundary)
    /// gives the one with zero interior values. Only `u` is divergence constrained.
    pub fn with_lift(space: Space<T>, f: T, mut lift: FeFunction<T>) -> Self {
        if lift.coefficients.len() != space.n_dofs() {
            lift.coefficients = vec![T::zero(); space.n_dofs()];
        }
        let mut p = Self::new(space, f);
        p.lift_gradient = Some(p.space.gradient(&lift));
        p.lift = Some(lift);
        p
    }

    pub fn space(&self) -> &Space<T> {
        &self.space
    }

    pub fn mesh(&self) -> &crate::mesh::Mesh<T> {
        self.space.mesh()
    }

    pub fn f(&self) -> T {
        self.f
    }

    /// `∫ f φ_j`.
    pub fn load(&self) -> &[T] {
        &self.load
    }

    pub fn lift(&self) -> Option<&FeFunction<T>> {
        self.lift.as_ref()
    }

    pub fn lift_gradient(&self) -> Option<&P0Field<T>> {
        self.lift_gradient.as_ref()
    }

    /// Whether the unknown carries the per-triangle divergence constraint.
    pub fn is_constrained(&self) -> bool {
        self.space.kind() == SpaceKind::KouhiaStenberg
    }

    pub fn n_triangles(&self) -> usize {
        self.space.mesh().n_triangles()
    }

    pub fn gradient_dim(&self) -> usize {
        self.space.gradient_dim()
    }

    pub fn zero_function(&self) -> FeFunction<T> {
        self.space.zero_function()
    }

    /// Broken (symmetric) gradient of `u + lift`.
    pub fn total_gradient(&self, u: &FeFunction<T>) -> P0Field<T> {
        let g = self.space.gradient(u);
        match &self.lift_gradient {
            Some(l) => g.axpy(T::one(), l),
            None => g,
        }
    }

    /// `f ∫ u`: the linear part of the primal energy.
    pub fn load_functional(&self, u: &FeFunction<T>) -> T {
        crate::scalar::dot(&self.load, &u.coefficients)
    }

    /// `B_Tj = ∫_T div φ_j`.
    pub fn constraint(&self) -> Result<&CsrMatrix<T>, FemError> {
        if !self.is_constrained() {
            return Err(FemError::WrongSpace { expected: "kouhia-stenberg", found: self.space.kind() });
        }
        Ok(self.constraint.get_or_init(|| assemble_divergence_constraint(&self.space).expect("vector space")))
    }

    pub fn stiffness(&self, coef: Coefficient<'_, T>) -> Result<CsrMatrix<T>, FemError> {
        self.pattern.get_or_init(|| StiffnessPattern::new(&self.space)).assemble(&self.space, coef)
    }

    /// `C_T g_T` per triangle.
    pub fn apply_coefficient(&self, coef: Coefficient<'_, T>, g: &P0Field<T>) -> P0Field<T> {
        match coef {
            Coefficient::Scalar(w) => g.scaled(w),
            Coefficient::RankOne { weight, extra, direction } => {
                let proj = direction.inner(g);
                let mut out = g.scaled(weight);
                for t in 0..out.len() {
                    let c = extra[t] * proj[t];
                    for (o, &n) in out.value_mut(t).iter_mut().zip(direction.value(t)) {
                        *o += c * n;
                    }
                }
                out
            }
        }
    }

    /// Solves `Σ_T |T| C_T ∇u · ∇v = rhs(v)` over the (constrained) space.
    pub fn solve(&self, coef: Coefficient<'_, T>, rhs: &[T]) -> Result<FeFunction<T>, FemError> {
        let n = self.space.n_dofs();
        if rhs.len() != n {
            return Err(FemError::DimensionMismatch { expected: n, found: rhs.len() });
        }
        if n == 0 {
            return Ok(self.zero_function());
        }
        let a = self.stiffness(coef)?;
        let symbolic = match self.symbolic.get() {
            Some(s) => s,
            None => {
                let s = LdlSymbolic::analyze(&a)?;
                self.symbolic.get_or_init(|| s)
            }
        };
        let factor = LdlFactor::new(symbolic, &a)?;
        let coefficients = if self.is_constrained() {
            let b = self.constraint()?;
            solve_saddle_factored(&factor, &a.diagonal(), b, rhs, None, &self.saddle)?.u
        } else {
            solve_with_factor(&a, &factor, rhs)?
        };
        Ok(FeFunction::from_coefficients(coefficients))
    }

    /// Right-hand side for a solve with coefficient `C` when the state is `u + lift`:
    /// `∫ f v − Σ_T |T| C_T ∇lift · ∇v`.
    pub fn rhs_with_lift(&self, coef: Coefficient<'_, T>) -> Vec<T> {
        match &self.lift_gradient {
            None => self.load.clone(),
            Some(lg) => {
                let shifted = self.space.load_from_field(&self.apply_coefficient(coef, lg));
                self.load.iter().zip(shifted).map(|(&b, s)| b - s).collect()
            }
        }
    }

    /// Residual `Σ_T |T| τ_T · ∇φ_j − ∫ f φ_j` of the discrete equilibrium constraint.
    pub fn equilibrium_residual(&self, tau: &P0Field<T>) -> Vec<T> {
        let r = self.space.load_from_field(tau);
        r.into_iter().zip(&self.load).map(|(a, &b)| a - b).collect()
    }

    /// Maximal violation of `∫ τ · ∇_h v = ∫ f v` over basis functions `v`, each
    /// normalised by `|v|_{H¹}`.
    ///
    /// On the vector space the test functions range over the divergence-constrained
    /// subspace: the residual is first reduced modulo the range of `Bᵀ` by a least
    /// squares projection, whose remainder vanishes exactly when `τ` is feasible.
    pub fn feasibility_residual(&self, tau: &P0Field<T>) -> Result<T, FemError> {
        if tau.dim() != self.gradient_dim() || tau.len() != self.n_triangles() {
            return Err(FemError::DimensionMismatch { expected: self.gradient_dim(), found: tau.dim() });
        }
        let mut r = self.equilibrium_residual(tau);
        if r.is_empty() {
            return Ok(T::zero());
        }
        if self.is_constrained() {
            let projector = self
                .projector
                .get_or_init(|| RangeProjector::new(self.constraint().expect("vector space"), self.mesh().areas()))
                .as_ref()
                .map_err(|e| FemError::Linalg(e.clone()))?;
            r = projector.remainder(&r);
        }
        Ok(r.iter()
            .zip(self.space.seminorms())
            .map(|(&x, &s)| if s > T::zero() { x.abs() / s } else { x.abs() })
            .fold(T::zero(), T::max))
    }

    /// `∫_T div u` per triangle.
    pub fn divergence(&self, u: &FeFunction<T>) -> Result<Vec<T>, FemError> {
        self.space.divergence(u)
    }
}

/// Orthogonal projection onto `range(Bᵀ)`, computed through the Gram matrix of the
/// area-normalised rows of `B`. The rows of `B` sum to zero and coarse meshes can add
/// further dependencies, so the Gram matrix is factored as a semidefinite matrix.
#[derive(Debug)]
struct RangeProjector<T> {
    rows: CsrMatrix<T>,
    gram: LdlFactor<T>,
}

impl<T: Real> RangeProjector<T> {
    fn new(b: &CsrMatrix<T>, areas: &[T]) -> Result<Self, LinalgError> {
        let m = b.n_rows();
        let mut triplets = Vec::with_capacity(b.nnz());
        for i in 0..m {
            let (cols, vals) = b.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((i, j, v / areas[i]));
            }
        }
        let rows = CsrMatrix::from_triplets(m, b.n_cols(), &triplets);
        let cols = rows.transpose();
        let mut g = Vec::new();
        for i in 0..rows.n_rows() {
            let (ci, vi) = rows.row(i);
            for (&j, &v) in ci.iter().zip(vi) {
                let (ck, wk) = cols.row(j);
                for (&k, &w) in ck.iter().zip(wk) {
                    g.push((i, k, v * w));
                }
            }
        }
        let gram = CsrMatrix::from_triplets(rows.n_rows(), rows.n_rows(), &g);
        let symbolic = LdlSymbolic::analyze(&gram)?;
        let (factor, _) = LdlFactor::new_semidefinite(&symbolic, &gram, T::tol(1e-10, 1e3))?;
        Ok(RangeProjector { rows, gram: factor })
    }

    fn remainder(&self, r: &[T]) -> Vec<T> {
        let mut rem = r.to_vec();
        // two sweeps: the second removes the roundoff left by the first
        for _ in 0..2 {
            if norm2(&rem) == T::zero() {
                break;
            }
            let q = self.gram.solve(&self.rows.mul_vec(&rem));
            let back = self.rows.mul_transpose_vec(&q);
            for (x, y) in rem.iter_mut().zip(back) {
                *x -= y;
            }
        }
        rem
    }
}
