//! Small dense linear algebra: row-major matrices, Cholesky, a tridiagonal
//! solve and a condition-number estimate. Sizes here are at most a few
//! hundred, so simple loops beat any external dependency.

use crate::error::{Error, Result};
use crate::numeric::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<R: Real> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![R::zero(); rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<R>>) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        Matrix { rows: n, cols: m, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> R {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut R {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
/// Reads only the lower triangle of `a`.
pub fn cholesky_lower<R: Real>(a: &Matrix<R>) -> Result<Matrix<R>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "cholesky needs a square matrix");
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.at(i, j);
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if !(s > R::zero()) || !s.is_finite() {
                    return Err(Error::Factorization { pivot: i, value: s.f64() });
                }
                *l.at_mut(i, j) = s.sqrt();
            } else {
                *l.at_mut(i, j) = s / l.at(j, j);
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` in place given the lower factor.
pub fn cholesky_solve_in_place<R: Real>(l: &Matrix<R>, b: &mut [R]) {
    let n = l.rows();
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.at(i, k) * b[k];
        }
        b[i] = s / l.at(i, i);
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l.at(k, i) * b[k];
        }
        b[i] = s / l.at(i, i);
    }
}

/// `y = L z` for a lower-triangular factor, used to colour white noise.
pub fn lower_mul<R: Real>(l: &Matrix<R>, z: &[R], out: &mut [R]) {
    let n = l.rows();
    debug_assert_eq!(z.len(), n);
    debug_assert_eq!(out.len(), n);
    for i in 0..n {
        let row = l.row(i);
        let mut s = R::zero();
        for (k, &zk) in z.iter().enumerate().take(i + 1) {
            s += row[k] * zk;
        }
        out[i] = s;
    }
}

/// Thomas algorithm for a tridiagonal system. `sub[0]` and `sup[n-1]` are
/// ignored. Overwrites `rhs` with the solution.
pub fn thomas_solve<R: Real>(sub: &[R], diag: &[R], sup: &[R], rhs: &mut [R]) -> Result<()> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    if n == 0 {
        return Ok(());
    }
    let mut scratch = vec![R::zero(); n];
    let mut piv = diag[0];
    if piv == R::zero() || !piv.is_finite() {
        return Err(Error::numerical("tridiagonal pivot vanished at row 0"));
    }
    rhs[0] = rhs[0] / piv;
    for i in 1..n {
        scratch[i] = sup[i - 1] / piv;
        piv = diag[i] - sub[i] * scratch[i];
        if piv == R::zero() || !piv.is_finite() {
            return Err(Error::numerical(format!("tridiagonal pivot vanished at row {i}")));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] = rhs[i] - scratch[i + 1] * next;
    }
    Ok(())
}

/// Condition estimate of a symmetric positive definite matrix via power
/// iteration on `A` and on `A^{-1}` (through its Cholesky factor).
/// Deterministic start vector, fixed iteration count; an estimate, not an
/// exact norm, which is all the ill-conditioning guard needs.
pub fn condition_estimate<R: Real>(a: &Matrix<R>, l: &Matrix<R>) -> R {
    let n = a.rows();
    if n == 0 {
        return R::one();
    }
    let norm = |v: &[R]| v.iter().map(|&x| x * x).sum::<R>().sqrt();
    let mut v = vec![R::one() / R::from_index(n).sqrt(); n];
    let mut w = vec![R::zero(); n];
    let mut lam_max = R::zero();
    for _ in 0..40 {
        for i in 0..n {
            let mut s = R::zero();
            for j in 0..n {
                s += a.at(i, j) * v[j];
            }
            w[i] = s;
        }
        lam_max = norm(&w);
        if lam_max == R::zero() {
            return R::infinity();
        }
        for i in 0..n {
            v[i] = w[i] / lam_max;
        }
    }
    let mut u = vec![R::one() / R::from_index(n).sqrt(); n];
    let mut lam_inv = R::zero();
    for _ in 0..40 {
        cholesky_solve_in_place(l, &mut u);
        lam_inv = norm(&u);
        if lam_inv == R::zero() || !lam_inv.is_finite() {
            return R::infinity();
        }
        for x in u.iter_mut() {
            *x = *x / lam_inv;
        }
    }
    lam_max * lam_inv
}
