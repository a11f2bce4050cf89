use super::LinalgError;
use crate::scalar::{dot, norm2, Real};

#[derive(Debug, Clone, Copy)]
pub struct CgOptions<T> {
    /// Stop once `‖b − A x‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for CgOptions<T> {
    fn default() -> Self {
        CgOptions { rel_tol: T::tol(1e-12, 8.0), max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgInfo<T> {
    pub iterations: usize,
    pub relative_residual: T,
}

/// Jacobi preconditioned conjugate gradients for `A x = b`, starting from `x`.
///
/// `apply(v, out)` writes `A v` into `out`. Zero diagonal entries are treated as one.
/// Semidefinite but consistent systems converge to a solution as long as `b` lies in
/// the range of `A`.
pub fn pcg<T, F>(apply: F, diag: &[T], b: &[T], x: &mut [T], opts: &CgOptions<T>) -> Result<CgInfo<T>, LinalgError>
where
    T: Real,
    F: Fn(&[T], &mut [T]),
{
    let n = b.len();
    if x.len() != n || diag.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: x.len().min(diag.len()) });
    }
    let bnorm = norm2(b);
    if !bnorm.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgInfo { iterations: 0, relative_residual: T::zero() });
    }
    let inv_diag: Vec<T> = diag.iter().map(|&d| if d > T::zero() { T::one() / d } else { T::one() }).collect();

    let mut r = vec![T::zero(); n];
    apply(x, &mut r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&a, &m)| a * m).collect();
    let mut p = z.clone();
    let mut q = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let target = opts.rel_tol * bnorm;

    for it in 0..opts.max_iter {
        let rnorm = norm2(&r);
        if rnorm <= target {
            return Ok(CgInfo { iterations: it, relative_residual: rnorm / bnorm });
        }
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > T::zero()) {
            return Err(LinalgError::Breakdown { iteration: it });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = norm2(&r) / bnorm;
    if rel <= opts.rel_tol {
        Ok(CgInfo { iterations: opts.max_iter, relative_residual: rel })
    } else {
        Err(LinalgError::NotConverged { iterations: opts.max_iter, residual: rel.to_f64().unwrap_or(f64::NAN) })
    }
}

#[cfg(test)]
mod tests {
    use super::super::CsrMatrix;
    use super::*;

    #[test]
    fn cg_solves_small_spd_system() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0)]);
        let b = [1.0, 2.0, 4.0];
        let mut x = vec![0.0f64; 3];
        let info = pcg(|v, o| a.mul_vec_into(v, o), &a.diagonal(), &b, &mut x, &CgOptions::default()).unwrap();
        assert!(info.iterations <= 3);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
        assert!((x[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cg_reports_indefinite_breakdown() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        let mut x = vec![0.0; 2];
        let r = pcg(|v, o| a.mul_vec_into(v, o), &[1.0, 1.0], &[0.0, 1.0], &mut x, &CgOptions::default());
        assert!(matches!(r, Err(LinalgError::Breakdown { .. })));
    }
}
