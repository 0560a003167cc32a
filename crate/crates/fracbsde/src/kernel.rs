//! Kernel analytics for fractional Brownian motion with `H > 1/2`:
//! covariance matrices, the singular-kernel inner product, the occupation
//! weight `sigma_hat`, its delayed variant and the ratio bound feeding the
//! admissibility constants.
//!
//! Every integral of the kernel `phi(x) = H(2H-1)|x|^{2H-2}` is done with
//! its exact antiderivatives, so cell contributions are closed-form and the
//! diagonal singularity never gets sampled:
//!   first antiderivative  `g1(x) = H sign(x)|x|^{2H-1}`
//!   second antiderivative `g2(x) = |x|^{2H} / 2`

use crate::coeff::DeterministicFn;
use crate::error::{Error, Result};
use crate::grid::{FbmModel, HurstParam, TimeGrid};
use crate::linalg::Matrix;
use crate::numeric::Real;

#[inline]
fn g1<R: Real>(x: R, hurst: HurstParam<R>) -> R {
    hurst.value() * x.signum() * x.abs_powf(hurst.two_h_minus_one())
}

#[inline]
fn g2<R: Real>(x: R, hurst: HurstParam<R>) -> R {
    R::of(0.5) * x.abs_powf(hurst.two_h())
}

/// Covariance matrix of the fBm at the positive grid nodes `t_1..t_n`.
pub fn fbm_covariance<R: Real>(model: &FbmModel<R>) -> Matrix<R> {
    let n = model.grid.steps();
    let mut cov = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = model.covariance(model.grid.node(i + 1), model.grid.node(j + 1));
            *cov.at_mut(i, j) = c;
            *cov.at_mut(j, i) = c;
        }
    }
    cov
}

/// Cell boundaries `0 = s_0 < ... < s_m = t`, following the grid nodes and
/// cutting the final cell at `t` when `t` is not a node.
fn cell_bounds<R: Real>(grid: &TimeGrid<R>, t: R) -> Vec<R> {
    let tol = grid.dt() * R::of(1e-9);
    let mut bounds = vec![R::zero()];
    for i in 1..=grid.steps() {
        let node = grid.node(i);
        if node < t - tol {
            bounds.push(node);
        } else {
            break;
        }
    }
    bounds.push(t);
    bounds
}

fn check_time<R: Real>(grid: &TimeGrid<R>, t: R) -> Result<()> {
    let tol = grid.dt() * R::of(1e-9);
    if !(t > R::zero()) || t > grid.horizon() + tol {
        return Err(Error::invalid(format!(
            "time {t} outside (0, {}] for kernel quadrature",
            grid.horizon()
        )));
    }
    Ok(())
}

/// Inner product `<f, g>_t = int_0^t int_0^t f(u) g(v) phi(u - v) du dv`
/// for deterministic integrands sampled at the cell midpoints. Exact for
/// functions that are constant on cells, in particular for indicators of
/// grid intervals; `<1, 1>_t = t^{2H}` identically.
pub fn inner_product<R: Real>(
    model: &FbmModel<R>,
    f: &DeterministicFn<R>,
    g: &DeterministicFn<R>,
    t: R,
) -> Result<R> {
    check_time(&model.grid, t)?;
    let bounds = cell_bounds(&model.grid, t);
    let m = bounds.len() - 1;
    let half = R::of(0.5);
    let fv: Vec<R> = (0..m).map(|j| f.eval(half * (bounds[j] + bounds[j + 1]))).collect();
    let gv: Vec<R> = (0..m).map(|j| g.eval(half * (bounds[j] + bounds[j + 1]))).collect();
    let h = model.hurst;
    let mut acc = R::zero();
    for i in 0..m {
        let (a0, a1) = (bounds[i], bounds[i + 1]);
        for j in 0..m {
            let (b0, b1) = (bounds[j], bounds[j + 1]);
            let w = g2(a1 - b0, h) - g2(a1 - b1, h) - g2(a0 - b0, h) + g2(a0 - b1, h);
            acc += fv[i] * gv[j] * w;
        }
    }
    Ok(acc)
}

/// Squared kernel norm `||sigma||_t^2 = <sigma, sigma>_t`, with the
/// convention that it vanishes at `t = 0`.
pub fn sigma_norm_sq<R: Real>(
    model: &FbmModel<R>,
    sigma: &DeterministicFn<R>,
    t: R,
) -> Result<R> {
    if t <= R::zero() {
        return Ok(R::zero());
    }
    inner_product(model, sigma, sigma, t)
}

/// Occupation weight `sigma_hat_t = int_0^t phi(t - v) sigma_v dv`.
/// For constant volatility this is `sigma H t^{2H-1}` exactly.
pub fn sigma_hat<R: Real>(model: &FbmModel<R>, sigma: &DeterministicFn<R>, t: R) -> R {
    sigma_hat_lagged(model, sigma, t, R::zero())
}

/// Delayed occupation weight `r_t = int_0^{(t-delta) v 0} phi(t - v) sigma_v dv`;
/// zero whenever `t <= delta`.
pub fn sigma_hat_lagged<R: Real>(
    model: &FbmModel<R>,
    sigma: &DeterministicFn<R>,
    t: R,
    delta: R,
) -> R {
    let upper = (t - delta).min(t.min(model.grid.horizon()));
    if upper <= model.grid.dt() * R::of(1e-12) {
        return R::zero();
    }
    let bounds = cell_bounds(&model.grid, upper);
    let h = model.hurst;
    let half = R::of(0.5);
    let mut acc = R::zero();
    for j in 0..bounds.len() - 1 {
        let mid = half * (bounds[j] + bounds[j + 1]);
        acc += sigma.eval(mid) * (g1(t - bounds[j], h) - g1(t - bounds[j + 1], h));
    }
    acc
}

/// Ratio bound `M`: the supremum over positive grid nodes of
/// `max(rho_s, 1/rho_s)` with `rho_s = sigma_hat_s / (sigma_s s^{2H-1})`,
/// floored at `2 + 1e-6` so it is always usable as a Lipschitz-side weight.
/// Constant volatility gives `rho = H < 1` everywhere, hence the floor binds.
pub fn ratio_bound<R: Real>(model: &FbmModel<R>, sigma: &DeterministicFn<R>) -> Result<R> {
    sigma.validate_volatility(&model.grid)?;
    let mut sup = R::zero();
    for i in 1..=model.grid.steps() {
        let s = model.grid.node(i);
        let num = sigma_hat(model, sigma, s);
        let den = sigma.eval(s) * s.abs_powf(model.hurst.two_h_minus_one());
        let rho = num / den;
        if !rho.is_finite() || rho <= R::zero() {
            return Err(Error::coefficient(format!(
                "occupation ratio at t = {s} is {rho}; volatility unusable"
            )));
        }
        sup = sup.max(rho).max(rho.recip());
    }
    Ok(sup.max(R::of(2.0 + 1e-6)))
}

/// Bundle of constants the delayed solver and the diagnostics share:
/// the ratio bound `M > 2`, the norm weight `beta >= 0` and the generator
/// Lipschitz constant `L >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants<R: Real> {
    pub m: R,
    pub beta: R,
    pub lipschitz: R,
}

impl<R: Real> KernelConstants<R> {
    pub fn new(m: R, beta: R, lipschitz: R) -> Result<Self> {
        if !(m > R::of(2.0)) || !m.is_finite() {
            return Err(Error::invalid(format!("ratio bound M must exceed 2, got {m}")));
        }
        if !(beta >= R::zero()) || !beta.is_finite() {
            return Err(Error::invalid(format!("norm weight beta must be >= 0, got {beta}")));
        }
        if !(lipschitz >= R::zero()) || !lipschitz.is_finite() {
            return Err(Error::invalid(format!(
                "Lipschitz constant must be >= 0, got {lipschitz}"
            )));
        }
        Ok(KernelConstants { m, beta, lipschitz })
    }
}
