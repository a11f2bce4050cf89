//! Sparse linear algebra for the assembled systems.
//!
//! Symmetric positive definite systems are solved by an up-looking sparse `LDLᵀ`
//! factorization after a nested-dissection reordering. [`pcg`] is a Jacobi
//! preconditioned conjugate gradient method on an abstract operator; it serves as a
//! fallback and as the outer iteration of [`solve_saddle`].

mod cg;
mod csr;
mod ldl;
mod ordering;
mod saddle;

use thiserror::Error;

pub use cg::{pcg, CgInfo, CgOptions};
pub use csr::CsrMatrix;
pub use ldl::{LdlFactor, LdlSymbolic};
pub use ordering::nested_dissection;
pub use saddle::{solve_saddle, solve_saddle_factored, SaddleOptions, SaddleSolution};

use crate::scalar::{norm2, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("conjugate gradient breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },
    #[error("iterative solver stopped after {iterations} iterations with relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("linear system contains non-finite values")]
    NonFinite,
}

/// Solves `A x = b` for symmetric positive definite `A`.
///
/// Uses a sparse `LDLᵀ` factorization with one step of iterative refinement. If the
/// refined residual misses `1e-12` relative, the result is polished by preconditioned
/// CG started from the direct solution.
pub fn solve_spd<T: Real>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let symbolic = LdlSymbolic::analyze(a)?;
    let factor = LdlFactor::new(&symbolic, a)?;
    solve_with_factor(a, &factor, b)
}

/// Solve with an existing factorization of `a`, refine once and verify the residual.
pub fn solve_with_factor<T: Real>(a: &CsrMatrix<T>, factor: &LdlFactor<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    if b.len() != a.n_rows() {
        return Err(LinalgError::DimensionMismatch { expected: a.n_rows(), found: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return Ok(vec![T::zero(); b.len()]);
    }
    let mut x = factor.solve(b);
    let mut r = residual(a, &x, b);
    let dx = factor.solve(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += *di;
    }
    r = residual(a, &x, b);
    let tol = T::tol(1e-12, 8.0);
    if norm2(&r) <= tol * bnorm {
        return Ok(x);
    }
    let opts = CgOptions { rel_tol: tol, max_iter: 10 * a.n_rows().max(100) };
    let diag = a.diagonal();
    pcg(|v, out| a.mul_vec_into(v, out), &diag, b, &mut x, &opts)?;
    Ok(x)
}

pub(crate) fn residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> Vec<T> {
    let mut r = a.mul_vec(x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::<f64>::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(solve_spd(&a, &b).unwrap(), b.to_vec());
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0)]);
        let x = solve_spd(&a, &[2.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0]), Err(LinalgError::NotPositiveDefinite { .. })));
    }
}
