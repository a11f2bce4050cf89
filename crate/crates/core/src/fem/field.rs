use super::{FeFunction, FemError, Space, SpaceKind};
use crate::mesh::Mesh;
use crate::scalar::Real;

/// Piecewise constant field: one flattened vector (length 2) or matrix (length 4,
/// row-major `[xx, xy, yx, yy]`) per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Field<T> {
    dim: usize,
    values: Vec<T>,
}

impl<T: Real> P0Field<T> {
    pub fn zeros(n_triangles: usize, dim: usize) -> Self {
        P0Field { dim, values: vec![T::zero(); n_triangles * dim] }
    }

    pub fn from_values(dim: usize, values: Vec<T>) -> Self {
        assert!(dim > 0 && values.len() % dim == 0, "values must hold whole entries");
        P0Field { dim, values }
    }

    pub fn from_fn<F: FnMut(usize) -> Vec<T>>(n_triangles: usize, dim: usize, mut f: F) -> Self {
        let mut values = Vec::with_capacity(n_triangles * dim);
        for t in 0..n_triangles {
            let v = f(t);
            assert_eq!(v.len(), dim);
            values.extend(v);
        }
        P0Field { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, t: usize) -> &[T] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn value_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// 2×2 matrix on triangle `t` of a matrix-valued field.
    pub fn matrix(&self, t: usize) -> [[T; 2]; 2] {
        assert_eq!(self.dim, 4, "not a matrix field");
        let v = self.value(t);
        [[v[0], v[1]], [v[2], v[3]]]
    }

    /// Euclidean (Frobenius for matrices) norm on triangle `t`.
    pub fn norm_at(&self, t: usize) -> T {
        self.value(t).iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn norms(&self) -> Vec<T> {
        (0..self.len()).map(|t| self.norm_at(t)).collect()
    }

    /// Per-triangle scaling `w_T · self_T`.
    pub fn scaled(&self, w: &[T]) -> P0Field<T> {
        assert_eq!(w.len(), self.len());
        let dim = self.dim;
        let values = self.values.iter().enumerate().map(|(k, &v)| v * w[k / dim]).collect();
        P0Field { dim, values }
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: T, other: &P0Field<T>) -> P0Field<T> {
        assert_eq!(self.dim, other.dim);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + s * b).collect();
        P0Field { dim: self.dim, values }
    }

    /// Pointwise product `self_T : other_T` per triangle.
    pub fn inner(&self, other: &P0Field<T>) -> Vec<T> {
        assert_eq!(self.dim, other.dim);
        (0..self.len())
            .map(|t| self.value(t).iter().zip(other.value(t)).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

impl<T: Real> Space<T> {
    /// Flattened broken gradient of `u` including its boundary payload.
    pub fn gradient(&self, u: &FeFunction<T>) -> P0Field<T> {
        let nt = self.mesh().n_triangles();
        let dim = self.gradient_dim();
        let mut out = P0Field::zeros(nt, dim);
        for t in 0..nt {
            let nodes = self.local_nodes(t);
            let acc = out.value_mut(t);
            for (l, &node) in nodes.iter().enumerate() {
                let c = u.node_value(self, node);
                if c != T::zero() {
                    for (a, &g) in acc.iter_mut().zip(self.local_gradient(t, l)) {
                        *a += c * g;
                    }
                }
            }
        }
        out
    }

    /// `∫_T div u` per triangle (vector space only).
    pub fn divergence(&self, u: &FeFunction<T>) -> Result<Vec<T>, FemError> {
        if self.kind() != SpaceKind::KouhiaStenberg {
            return Err(FemError::WrongSpace { expected: "kouhia-stenberg", found: self.kind() });
        }
        let mesh = self.mesh();
        Ok((0..mesh.n_triangles())
            .map(|t| {
                let s: T = self
                    .local_nodes(t)
                    .iter()
                    .enumerate()
                    .map(|(l, &n)| u.node_value(self, n) * self.local_divergence(t, l))
                    .sum();
                s * mesh.area(t)
            })
            .collect())
    }
}

/// Piecewise gradient of a scalar finite element function.
pub fn broken_gradient<T: Real>(space: &Space<T>, u: &FeFunction<T>) -> Result<P0Field<T>, FemError> {
    match space.kind() {
        SpaceKind::KouhiaStenberg => Err(FemError::WrongSpace { expected: "scalar", found: space.kind() }),
        _ => Ok(space.gradient(u)),
    }
}

/// `ε_h(u + lift)` per triangle as a symmetric 2×2 matrix field.
pub fn broken_symmetric_gradient<T: Real>(
    space: &Space<T>,
    u: &FeFunction<T>,
    lift: Option<&FeFunction<T>>,
) -> Result<P0Field<T>, FemError> {
    if space.kind() != SpaceKind::KouhiaStenberg {
        return Err(FemError::WrongSpace { expected: "kouhia-stenberg", found: space.kind() });
    }
    let g = space.gradient(u);
    Ok(match lift {
        Some(l) => g.axpy(T::one(), &space.gradient(l)),
        None => g,
    })
}

/// L² projection onto piecewise constants of a field given pointwise per triangle.
///
/// Uses the edge-midpoint rule, which is exact for quadratic integrands.
pub fn p0_project<T: Real, F: Fn(usize, [T; 2]) -> Vec<T>>(mesh: &Mesh<T>, dim: usize, field: F) -> P0Field<T> {
    let third = T::one() / T::lit(3.0);
    P0Field::from_fn(mesh.n_triangles(), dim, |t| {
        let mut acc = vec![T::zero(); dim];
        for e in mesh.triangle_edges(t) {
            let v = field(t, mesh.edge_midpoint(e));
            assert_eq!(v.len(), dim);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x * third;
            }
        }
        acc
    })
}
