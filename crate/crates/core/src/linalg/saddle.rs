//! `[A Bᵀ; B 0] [u; p] = [f; 0]` by conjugate gradients on the Schur complement
//! `S = B A⁻¹ Bᵀ`, with `A⁻¹` applied through a sparse factorization.
//!
//! Since `u = A⁻¹(f − Bᵀp)` is recovered by a direct solve, the first block row holds
//! to factorization accuracy for any multiplier iterate. Only the constraint `B u = 0`
//! carries the iteration error.

use super::{pcg, CgOptions, CsrMatrix, LdlFactor, LdlSymbolic, LinalgError};
use crate::scalar::{norm2, norm_inf, Real};

#[derive(Debug, Clone, Copy)]
pub struct SaddleOptions<T> {
    /// Stop once `‖B u‖ ≤ max(rel_tol · ‖B A⁻¹ f‖, abs_tol)`.
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_iter: usize,
    /// Drop the first constraint row and fix its multiplier to zero. Appropriate when
    /// the rows of `B` sum to zero, as for divergence constraints with zero boundary values.
    pub pin_first: bool,
}

impl<T: Real> Default for SaddleOptions<T> {
    fn default() -> Self {
        SaddleOptions { rel_tol: T::tol(1e-13, 16.0), abs_tol: T::tol(1e-16, 16.0), max_iter: 5000, pin_first: true }
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSolution<T> {
    pub u: Vec<T>,
    /// One multiplier per constraint row; the pinned entry is zero.
    pub multiplier: Vec<T>,
    pub iterations: usize,
    /// `max_k |(B u)_k|`.
    pub constraint_residual: T,
}

pub fn solve_saddle<T: Real>(
    a: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    f: &[T],
    opts: &SaddleOptions<T>,
) -> Result<SaddleSolution<T>, LinalgError> {
    let symbolic = LdlSymbolic::analyze(a)?;
    let factor = LdlFactor::new(&symbolic, a)?;
    solve_saddle_factored(&factor, &a.diagonal(), b, f, None, opts)
}

/// Saddle solve with a precomputed factorization of `A` and an optional multiplier guess.
pub fn solve_saddle_factored<T: Real>(
    factor: &LdlFactor<T>,
    a_diag: &[T],
    b: &CsrMatrix<T>,
    f: &[T],
    guess: Option<&[T]>,
    opts: &SaddleOptions<T>,
) -> Result<SaddleSolution<T>, LinalgError> {
    let n = factor.dim();
    let m = b.n_rows();
    if b.n_cols() != n || f.len() != n || a_diag.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: b.n_cols() });
    }
    let skip = usize::from(opts.pin_first && m > 0);
    let k = m - skip;
    if k == 0 {
        let u = factor.solve(f);
        let c = norm_inf(&b.mul_vec(&u));
        return Ok(SaddleSolution { u, multiplier: vec![T::zero(); m], iterations: 0, constraint_residual: c });
    }

    // Full-length multiplier with the pinned slot kept at zero.
    let expand = |p: &[T]| {
        let mut full = vec![T::zero(); m];
        full[skip..].copy_from_slice(p);
        full
    };
    let velocity = |p: &[T]| {
        let mut rhs = b.mul_transpose_vec(&expand(p));
        for (r, &fi) in rhs.iter_mut().zip(f) {
            *r = fi - *r;
        }
        factor.solve(&rhs)
    };
    let schur = |p: &[T], out: &mut [T]| {
        let y = factor.solve(&b.mul_transpose_vec(&expand(p)));
        let by = b.mul_vec(&y);
        out.copy_from_slice(&by[skip..]);
    };
    let precond: Vec<T> = (skip..m)
        .map(|r| {
            let (cols, vals) = b.row(r);
            cols.iter().zip(vals).map(|(&j, &v)| v * v / a_diag[j]).sum()
        })
        .collect();

    let g: Vec<T> = b.mul_vec(&factor.solve(f))[skip..].to_vec();
    let gnorm = norm2(&g);
    let target = (opts.rel_tol * gnorm).max(opts.abs_tol);
    let mut p: Vec<T> = match guess {
        Some(q) if q.len() == m => q[skip..].to_vec(),
        _ => vec![T::zero(); k],
    };

    let mut iterations = 0;
    let mut u = velocity(&p);
    let mut residual = norm2(&b.mul_vec(&u)[skip..]);
    for _round in 0..4 {
        if residual <= target {
            break;
        }
        // Solve S δ = r for the correction, so that the initial guess enters exactly.
        let r: Vec<T> = b.mul_vec(&u)[skip..].to_vec();
        let rnorm = norm2(&r);
        let mut delta = vec![T::zero(); k];
        let cg = CgOptions { rel_tol: (target / rnorm).min(T::one()), max_iter: opts.max_iter };
        iterations += match pcg(schur, &precond, &r, &mut delta, &cg) {
            Ok(info) => info.iterations,
            // keep the partial correction; the outer residual check decides
            Err(LinalgError::NotConverged { .. }) => opts.max_iter,
            Err(e) => return Err(e),
        };
        for (pi, di) in p.iter_mut().zip(&delta) {
            *pi += *di;
        }
        u = velocity(&p);
        residual = norm2(&b.mul_vec(&u)[skip..]);
    }
    if !(residual <= T::lit(10.0) * target) {
        return Err(LinalgError::NotConverged {
            iterations,
            residual: (residual / gnorm.max(T::min_positive_value())).to_f64().unwrap_or(f64::NAN),
        });
    }
    let constraint_residual = norm_inf(&b.mul_vec(&u));
    Ok(SaddleSolution { u, multiplier: expand(&p), iterations, constraint_residual })
}
