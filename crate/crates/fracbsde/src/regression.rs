//! Cross-sectional least squares for conditional expectations: polynomial
//! basis in the standardized current and delayed state, ridge-stabilised
//! normal equations, and analytic gradients of the fitted surface.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, cholesky_solve_in_place, condition_estimate, Matrix};
use crate::numeric::Real;

/// Condition estimate above which a fit is rejected outright.
const COND_LIMIT: f64 = 1e12;

/// Coordinates whose sample spread is below this relative threshold carry
/// no cross-sectional information and are dropped from the basis.
const DEGENERATE_SPREAD: f64 = 1e-12;

/// Fitted polynomial surface `E[target | x1, x2]` at one time step.
#[derive(Debug, Clone)]
pub struct StepFit<R: Real> {
    terms: Vec<(u8, u8)>,
    mean: [R; 2],
    scale: [R; 2],
    active: [bool; 2],
    coeffs: Vec<R>,
    pub cond: R,
}

impl<R: Real> StepFit<R> {
    #[inline]
    fn standardized(&self, x1: R, x2: R) -> (R, R) {
        let u1 = if self.active[0] { (x1 - self.mean[0]) / self.scale[0] } else { R::zero() };
        let u2 = if self.active[1] { (x2 - self.mean[1]) / self.scale[1] } else { R::zero() };
        (u1, u2)
    }

    pub fn predict(&self, x1: R, x2: R) -> R {
        let (u1, u2) = self.standardized(x1, x2);
        let mut acc = R::zero();
        for (&(p1, p2), &c) in self.terms.iter().zip(&self.coeffs) {
            acc += c * ipow(u1, p1) * ipow(u2, p2);
        }
        acc
    }

    /// Gradient with respect to the raw coordinates. Dropped coordinates
    /// get slope zero: the ensemble carries no information along them.
    pub fn gradient(&self, x1: R, x2: R) -> (R, R) {
        let (u1, u2) = self.standardized(x1, x2);
        let mut g1 = R::zero();
        let mut g2 = R::zero();
        for (&(p1, p2), &c) in self.terms.iter().zip(&self.coeffs) {
            if p1 > 0 {
                g1 += c * R::from_index(p1 as usize) * ipow(u1, p1 - 1) * ipow(u2, p2);
            }
            if p2 > 0 {
                g2 += c * R::from_index(p2 as usize) * ipow(u1, p1) * ipow(u2, p2 - 1);
            }
        }
        let d1 = if self.active[0] { g1 / self.scale[0] } else { R::zero() };
        let d2 = if self.active[1] { g2 / self.scale[1] } else { R::zero() };
        (d1, d2)
    }
}

#[inline]
fn ipow<R: Real>(x: R, p: u8) -> R {
    match p {
        0 => R::one(),
        1 => x,
        2 => x * x,
        _ => x.powi(p as i32),
    }
}

fn moments<R: Real>(xs: &[R]) -> (R, R) {
    let n = R::from_index(xs.len());
    let mut mean = R::zero();
    for &x in xs {
        mean += x;
    }
    mean /= n;
    let mut var = R::zero();
    for &x in xs {
        let d = x - mean;
        var += d * d;
    }
    (mean, (var / n).sqrt())
}

/// Least-squares fit of `target` on the polynomial basis of total degree
/// `degree` in the standardized coordinates. `step` only labels errors.
pub fn fit_conditional<R: Real>(
    degree: usize,
    x1: &[R],
    x2: Option<&[R]>,
    target: &[R],
    ridge: R,
    step: usize,
) -> Result<StepFit<R>> {
    let n = x1.len();
    if n == 0 || target.len() != n || x2.is_some_and(|v| v.len() != n) {
        return Err(Error::invalid("regression inputs must share a nonzero length"));
    }
    if degree == 0 || degree > 6 {
        return Err(Error::invalid(format!("basis degree {degree} unsupported")));
    }
    let (m1, s1) = moments(x1);
    let active1 = s1 > R::of(DEGENERATE_SPREAD) * (R::one() + m1.abs());
    let (m2, s2, active2) = match x2 {
        Some(v) => {
            let (m, s) = moments(v);
            let act = s > R::of(DEGENERATE_SPREAD) * (R::one() + m.abs());
            (m, s, act)
        }
        None => (R::zero(), R::one(), false),
    };
    let mut terms: Vec<(u8, u8)> = Vec::new();
    for total in 0..=degree {
        for p1 in (0..=total).rev() {
            let p2 = total - p1;
            if (p1 == 0 || active1) && (p2 == 0 || active2) {
                terms.push((p1 as u8, p2 as u8));
            }
        }
    }
    terms.dedup();
    let k = terms.len();

    let fit = StepFit {
        terms: terms.clone(),
        mean: [m1, m2],
        scale: [if active1 { s1 } else { R::one() }, if active2 { s2 } else { R::one() }],
        active: [active1, active2],
        coeffs: vec![R::zero(); k],
        cond: R::one(),
    };

    // normal equations accumulated sequentially: results must not depend on
    // the thread count anywhere in the pipeline
    let mut ata: Matrix<R> = Matrix::zeros(k, k);
    let mut aty = vec![R::zero(); k];
    let mut row = vec![R::zero(); k];
    for p in 0..n {
        let (u1, u2) = fit.standardized(x1[p], x2.map_or(R::zero(), |v| v[p]));
        for (c, &(p1, p2)) in row.iter_mut().zip(&terms) {
            *c = ipow(u1, p1) * ipow(u2, p2);
        }
        for i in 0..k {
            for j in 0..=i {
                *ata.at_mut(i, j) += row[i] * row[j];
            }
            aty[i] += row[i] * target[p];
        }
    }
    let nf = R::from_index(n);
    for i in 0..k {
        for j in 0..=i {
            let v = ata.at(i, j) / nf;
            *ata.at_mut(i, j) = v;
            *ata.at_mut(j, i) = v;
        }
        *ata.at_mut(i, i) += ridge;
        aty[i] /= nf;
    }
    let factor = cholesky_lower(&ata).map_err(|_| Error::IllConditioned {
        step,
        cond: f64::INFINITY,
    })?;
    let cond = condition_estimate(&ata, &factor);
    if cond.f64() > COND_LIMIT {
        return Err(Error::IllConditioned { step, cond: cond.f64() });
    }
    let mut coeffs = aty;
    cholesky_solve_in_place(&factor, &mut coeffs);
    Ok(StepFit { coeffs, cond, ..fit })
}
