//! Up-looking sparse `LDLᵀ` factorization.
//!
//! The symbolic phase computes the elimination tree and the column counts of `L`
//! for the permuted matrix `P A Pᵀ`; the numeric phase computes one row of `L` at a
//! time by a sparse triangular solve whose pattern is read off the elimination tree.

use super::{nested_dissection, CsrMatrix, LinalgError};
use crate::scalar::Real;

const NONE: usize = usize::MAX;

/// Ordering and elimination structure, reusable for every matrix with the same pattern.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
}

impl LdlSymbolic {
    /// Nested-dissection ordering followed by symbolic analysis.
    pub fn analyze<T: Real>(a: &CsrMatrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch { expected: a.n_rows(), found: a.n_cols() });
        }
        let perm = nested_dissection(a.n_rows(), a.row_ptr(), a.col_idx());
        Self::with_ordering(a, perm)
    }

    /// Symbolic analysis for a given permutation `perm[new] = old`.
    pub fn with_ordering<T: Real>(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self, LinalgError> {
        let n = a.n_rows();
        if perm.len() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, found: perm.len() });
        }
        let mut pinv = vec![NONE; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut counts = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let (cols, _) = a.row(perm[k]);
            for &j in cols {
                let mut i = pinv[j];
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    counts[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for k in 0..n {
            col_ptr.push(col_ptr[k] + counts[k]);
        }
        Ok(LdlSymbolic { n, perm, pinv, parent, col_ptr })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of strictly lower entries of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.col_ptr[self.n]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

/// Numeric factor `P A Pᵀ = L D Lᵀ` with unit lower triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
}

impl<T: Real> LdlFactor<T> {
    /// Fails with [`LinalgError::NotPositiveDefinite`] on a non-positive pivot.
    pub fn new(symbolic: &LdlSymbolic, a: &CsrMatrix<T>) -> Result<Self, LinalgError> {
        Self::factor(symbolic, a, None).map(|(f, _)| f)
    }

    /// Factorization of a positive semidefinite matrix. A pivot below `rel_tol` times its
    /// diagonal entry marks a dependent row: its pivot becomes infinite, so solves return
    /// a solution of any consistent system with the dependent unknowns set to zero.
    /// Returns the factor and the number of dependent rows.
    pub fn new_semidefinite(symbolic: &LdlSymbolic, a: &CsrMatrix<T>, rel_tol: T) -> Result<(Self, usize), LinalgError> {
        Self::factor(symbolic, a, Some(rel_tol))
    }

    fn factor(symbolic: &LdlSymbolic, a: &CsrMatrix<T>, rel_tol: Option<T>) -> Result<(Self, usize), LinalgError> {
        let n = symbolic.n;
        if a.n_rows() != n || a.n_cols() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, found: a.n_rows() });
        }
        let nnz = symbolic.factor_nnz();
        let col_ptr = symbolic.col_ptr.clone();
        let mut row_idx = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut filled = vec![0usize; n];
        let (perm, pinv, parent) = (&symbolic.perm, &symbolic.pinv, &symbolic.parent);
        let mut dependent = 0;

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = a.row(perm[k]);
            for (&j, &v) in cols.iter().zip(vals) {
                let mut i = pinv[j];
                if i > k {
                    continue;
                }
                if !v.is_finite() {
                    return Err(LinalgError::NonFinite);
                }
                y[i] += v;
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            let diagonal = y[k];
            y[k] = T::zero();
            while top < n {
                let i = pattern[top];
                top += 1;
                let yi = y[i];
                y[i] = T::zero();
                let end = col_ptr[i] + filled[i];
                for p in col_ptr[i]..end {
                    y[row_idx[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                row_idx[end] = k;
                lx[end] = l_ki;
                filled[i] += 1;
            }
            if let Some(tol) = rel_tol {
                if !(d[k] > tol * diagonal.abs()) && d[k] >= -tol.sqrt() * diagonal.abs() {
                    d[k] = T::infinity();
                    dependent += 1;
                    continue;
                }
            }
            if !(d[k] > T::zero()) {
                return Err(LinalgError::NotPositiveDefinite { pivot: k, value: d[k].to_f64().unwrap_or(f64::NAN) });
            }
        }
        Ok((LdlFactor { n, perm: perm.clone(), col_ptr, row_idx, lx, d }, dependent))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        self.solve_into(b, &mut x);
        x
    }

    /// `x = A⁻¹ b`.
    pub fn solve_into(&self, b: &[T], x: &mut [T]) {
        assert_eq!(b.len(), self.n);
        assert_eq!(x.len(), self.n);
        let mut w: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let wj = w[j];
            if wj != T::zero() {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    w[self.row_idx[p]] -= self.lx[p] * wj;
                }
            }
        }
        for (wj, &dj) in w.iter_mut().zip(&self.d) {
            *wj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut s = w[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s -= self.lx[p] * w[self.row_idx[p]];
            }
            w[j] = s;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = w[new];
        }
    }

    /// Pivots of `D` in factorization order; infinite for dependent rows.
    pub fn pivots(&self) -> &[T] {
        &self.d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_2d(m: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        let id = |i: usize, j: usize| j * m + i;
        for j in 0..m {
            for i in 0..m {
                t.push((id(i, j), id(i, j), 4.0));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.0));
                }
                if i + 1 < m {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, m * m, &t)
    }

    #[test]
    fn solves_grid_laplacian() {
        let a = laplacian_2d(30);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x_true: Vec<f64> = (0..900).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.mul_vec(&x_true);
        let sym = LdlSymbolic::analyze(&a).unwrap();
        let f = LdlFactor::new(&sym, &a).unwrap();
        let x = f.solve(&b);
        let err = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "error {err}");
    }

    #[test]
    fn nested_dissection_beats_natural_fill() {
        let a = laplacian_2d(40);
        let nd = LdlSymbolic::analyze(&a).unwrap();
        let natural = LdlSymbolic::with_ordering(&a, (0..1600).collect()).unwrap();
        assert!(nd.factor_nnz() < natural.factor_nnz(), "{} vs {}", nd.factor_nnz(), natural.factor_nnz());
    }

    #[test]
    fn identity_ordering_matches_dense_ldl() {
        // A = [[4,2,0],[2,5,1],[0,1,3]]: L = [[1],[0.5,1],[0,0.25,1]], D = (4, 4, 2.75)
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 5.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 3.0)],
        );
        let sym = LdlSymbolic::with_ordering(&a, vec![0, 1, 2]).unwrap();
        let f = LdlFactor::new(&sym, &a).unwrap();
        assert_eq!(f.pivots(), &[4.0, 4.0, 2.75]);
    }

    #[test]
    fn semidefinite_factor_solves_consistent_systems() {
        // graph Laplacian of a path: rank n - 1
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let s = LdlSymbolic::analyze(&a).unwrap();
        assert!(LdlFactor::new(&s, &a).is_err());
        let (f, dependent) = LdlFactor::new_semidefinite(&s, &a, 1e-10).unwrap();
        assert_eq!(dependent, 1);
        let b = [1.0f64, -2.0, 0.5, 0.0, 0.25, 0.25];
        let x = f.solve(&b);
        for (ax, bi) in a.mul_vec(&x).iter().zip(b) {
            assert!((ax - bi).abs() < 1e-12f64);
        }
    }

    #[test]
    fn single_precision_factorization() {
        let a64 = laplacian_2d(10);
        let t: Vec<(usize, usize, f32)> = (0..100)
            .flat_map(|i| {
                let (c, v) = a64.row(i);
                c.iter().zip(v).map(move |(&j, &x)| (i, j, x as f32)).collect::<Vec<_>>()
            })
            .collect();
        let a = CsrMatrix::from_triplets(100, 100, &t);
        let b = vec![1.0f32; 100];
        let x = LdlFactor::new(&LdlSymbolic::analyze(&a).unwrap(), &a).unwrap().solve(&b);
        let r = super::super::residual(&a, &x, &b);
        assert!(r.iter().all(|v| v.abs() < 1e-4));
    }
}
