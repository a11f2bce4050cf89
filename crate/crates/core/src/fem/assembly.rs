use super::space::NO_DOF;
use super::{FemError, P0Field, Space, SpaceKind};
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

/// Piecewise constant coefficient of a stiffness form `Σ_T |T| C_T ∇φ_j · ∇φ_i`.
#[derive(Debug, Clone, Copy)]
pub enum Coefficient<'a, T> {
    /// `C_T = w_T I`.
    Scalar(&'a [T]),
    /// `C_T = w_T I + c_T n_T n_Tᵀ` with a flattened direction `n_T`.
    RankOne { weight: &'a [T], extra: &'a [T], direction: &'a P0Field<T> },
}

impl<T: Real> Coefficient<'_, T> {
    fn validate(&self, n_triangles: usize) -> Result<(), FemError> {
        let w = match self {
            Coefficient::Scalar(w) => w,
            Coefficient::RankOne { weight, extra, direction } => {
                if extra.len() != n_triangles || direction.len() != n_triangles {
                    return Err(FemError::DimensionMismatch { expected: n_triangles, found: extra.len() });
                }
                if let Some(t) = extra.iter().position(|c| !c.is_finite()) {
                    return Err(FemError::InvalidWeight { triangle: t, value: extra[t].to_f64().unwrap_or(f64::NAN) });
                }
                weight
            }
        };
        if w.len() != n_triangles {
            return Err(FemError::DimensionMismatch { expected: n_triangles, found: w.len() });
        }
        match w.iter().position(|&x| !(x.is_finite() && x > T::zero())) {
            Some(t) => Err(FemError::InvalidWeight { triangle: t, value: w[t].to_f64().unwrap_or(f64::NAN) }),
            None => Ok(()),
        }
    }
}

/// Sparsity pattern of the stiffness matrix on the degrees of freedom, with the
/// value slot of every local pair `(l, m)` of every triangle.
#[derive(Debug, Clone)]
pub(crate) struct StiffnessPattern<T> {
    pub(crate) matrix: CsrMatrix<T>,
    slots: Vec<usize>,
}

impl<T: Real> StiffnessPattern<T> {
    pub(crate) fn new(space: &Space<T>) -> Self {
        let nl = space.local_count();
        let nt = space.mesh().n_triangles();
        let mut triplets = Vec::with_capacity(nt * nl * nl);
        for t in 0..nt {
            let dofs: Vec<usize> = space.local_nodes(t).iter().map(|&n| space.dof_of_node(n).unwrap_or(NO_DOF)).collect();
            for &i in &dofs {
                for &j in &dofs {
                    if i != NO_DOF && j != NO_DOF {
                        triplets.push((i, j, T::zero()));
                    }
                }
            }
        }
        let n = space.n_dofs();
        let matrix = CsrMatrix::from_triplets(n, n, &triplets);
        let mut slots = Vec::with_capacity(nt * nl * nl);
        for t in 0..nt {
            let dofs: Vec<usize> = space.local_nodes(t).iter().map(|&n| space.dof_of_node(n).unwrap_or(NO_DOF)).collect();
            for &i in &dofs {
                for &j in &dofs {
                    slots.push(if i != NO_DOF && j != NO_DOF { matrix.position(i, j).unwrap() } else { NO_DOF });
                }
            }
        }
        StiffnessPattern { matrix, slots }
    }

    pub(crate) fn assemble(&self, space: &Space<T>, coef: Coefficient<'_, T>) -> Result<CsrMatrix<T>, FemError> {
        let mesh = space.mesh();
        let nt = mesh.n_triangles();
        coef.validate(nt)?;
        let nl = space.local_count();
        let dim = space.gradient_dim();
        let mut a = self.matrix.clone();
        let values = a.values_mut();
        values.iter_mut().for_each(|v| *v = T::zero());
        let mut proj = vec![T::zero(); nl];
        for t in 0..nt {
            let area = mesh.area(t);
            let (w, rank_one) = match coef {
                Coefficient::Scalar(w) => (w[t], None),
                Coefficient::RankOne { weight, extra, direction } => (weight[t], Some((extra[t], direction.value(t)))),
            };
            if let Some((_, n)) = rank_one {
                for (l, p) in proj.iter_mut().enumerate() {
                    *p = space.local_gradient(t, l).iter().zip(n).map(|(&g, &d)| g * d).sum();
                }
            }
            let base = t * nl * nl;
            for l in 0..nl {
                let gl = space.local_gradient(t, l);
                for m in 0..nl {
                    let slot = self.slots[base + l * nl + m];
                    if slot == NO_DOF {
                        continue;
                    }
                    let gm = space.local_gradient(t, m);
                    let mut k = w * (0..dim).map(|d| gl[d] * gm[d]).sum::<T>();
                    if let Some((c, _)) = rank_one {
                        k += c * proj[l] * proj[m];
                    }
                    values[slot] += area * k;
                }
            }
        }
        Ok(a)
    }
}

/// `A_ij = Σ_T w_T |T| ∇φ_j · ∇φ_i` (Frobenius product of symmetric gradients for
/// the vector space) on the degrees of freedom.
pub fn assemble_weighted_stiffness<T: Real>(space: &Space<T>, w: &[T]) -> Result<CsrMatrix<T>, FemError> {
    StiffnessPattern::new(space).assemble(space, Coefficient::Scalar(w))
}

/// `b_j = f ∫_Ω φ_j` for constant `f`, exact. For the vector space `f` acts on the
/// first velocity component.
pub fn assemble_load<T: Real>(space: &Space<T>, f: T) -> Vec<T> {
    let mut b = vec![T::zero(); space.n_dofs()];
    if f == T::zero() {
        return b;
    }
    for t in 0..space.mesh().n_triangles() {
        for (l, &node) in space.local_nodes(t).iter().enumerate() {
            if let Some(d) = space.dof_of_node(node) {
                b[d] += f * space.local_integral(t, l);
            }
        }
    }
    b
}

/// `B_Tj = ∫_T div φ_j`, one row per triangle.
pub fn assemble_divergence_constraint<T: Real>(space: &Space<T>) -> Result<CsrMatrix<T>, FemError> {
    if space.kind() != SpaceKind::KouhiaStenberg {
        return Err(FemError::WrongSpace { expected: "kouhia-stenberg", found: space.kind() });
    }
    let mesh = space.mesh();
    let mut triplets = Vec::with_capacity(mesh.n_triangles() * 6);
    for t in 0..mesh.n_triangles() {
        for (l, &node) in space.local_nodes(t).iter().enumerate() {
            if let Some(d) = space.dof_of_node(node) {
                triplets.push((t, d, mesh.area(t) * space.local_divergence(t, l)));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_triangles(), space.n_dofs(), &triplets))
}

impl<T: Real> Space<T> {
    /// `Σ_T |T| τ_T · ∇φ_j` for every degree of freedom `j`.
    pub fn load_from_field(&self, tau: &P0Field<T>) -> Vec<T> {
        assert_eq!(tau.dim(), self.gradient_dim());
        let mesh = self.mesh();
        let mut out = vec![T::zero(); self.n_dofs()];
        for t in 0..mesh.n_triangles() {
            let area = mesh.area(t);
            let v = tau.value(t);
            for (l, &node) in self.local_nodes(t).iter().enumerate() {
                if let Some(d) = self.dof_of_node(node) {
                    let s: T = self.local_gradient(t, l).iter().zip(v).map(|(&g, &x)| g * x).sum();
                    out[d] += area * s;
                }
            }
        }
        out
    }
}
