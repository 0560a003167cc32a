//! Exact-in-law samplers for fractional Brownian motion on the grid.
//!
//! Both methods draw one independent ChaCha stream per path, derived from
//! the master seed and the path index. The stream assignment makes every
//! path's noise independent of scheduling, so runs are bit-identical for
//! any thread count and paths can be regenerated individually.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::coeff::DeterministicFn;
use crate::error::{Error, Result};
use crate::grid::FbmModel;
use crate::kernel::{fbm_covariance, sigma_norm_sq};
use crate::linalg::{cholesky_lower, lower_mul, Matrix};
use crate::numeric::Real;
use crate::paths::{ForwardEnsemble, PathEnsemble, PathMatrix};

/// Sampling method. Both are exact for the grid marginals; they differ in
/// cost profile, not in law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    /// Dense Cholesky factor of the node covariance; O(n^3) setup,
    /// O(n^2) per path.
    Cholesky,
    /// Hosking / Durbin-Levinson recursion on the stationary increments;
    /// O(n^2) setup, O(n^2) per path, no dense factor stored.
    Hosking,
}

fn path_rng(seed: u64, path: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Samples `n_paths` fBm paths at the grid nodes.
pub fn sample_paths<R: Real>(
    model: &FbmModel<R>,
    n_paths: usize,
    seed: u64,
    method: SampleMethod,
) -> Result<PathEnsemble<R>>
where
    StandardNormal: Distribution<R>,
{
    if n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let n = model.grid.steps();
    let mut values = PathMatrix::zeros(n_paths, n + 1);
    match method {
        SampleMethod::Cholesky => {
            let factor = cholesky_lower(&fbm_covariance(model))?;
            values.par_rows_mut().for_each(|(p, row)| {
                let mut rng = path_rng(seed, p);
                let z: Vec<R> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                lower_mul(&factor, &z, &mut row[1..]);
            });
        }
        SampleMethod::Hosking => {
            let rec = HoskingRecursion::new(model)?;
            let scale = model.grid.dt().abs_powf(model.hurst.value());
            values.par_rows_mut().for_each(|(p, row)| {
                let mut rng = path_rng(seed, p);
                let mut fgn = vec![R::zero(); n];
                rec.sample_into(&mut rng, &mut fgn);
                let mut acc = R::zero();
                for j in 0..n {
                    acc += scale * fgn[j];
                    row[j + 1] = acc;
                }
            });
        }
    }
    Ok(PathEnsemble { model: *model, values })
}

/// Forward state ensemble under the Gaussian-smoothing transition used by
/// the parabolic value field: independent increments with cell-midpoint
/// drift and variance increments of the volatility norm, so the state at
/// `t` is exactly N(eta0 + int b, ||sigma||_t^2) and increments over
/// disjoint intervals are independent.
///
/// Cross-sectional regressions on this ensemble estimate the same
/// conditional expectations the value field encodes. On exact fBm paths
/// they would instead estimate conditionals of the persistent fBm law,
/// whose backward composition inflates slopes by roughly
/// `(T/t)^{2H-1}`; those paths stay reserved for the law diagnostics.
pub fn simulate_forward_quasi<R: Real>(
    eta0: R,
    drift: &DeterministicFn<R>,
    vol: &DeterministicFn<R>,
    model: &FbmModel<R>,
    n_paths: usize,
    seed: u64,
) -> Result<ForwardEnsemble<R>>
where
    StandardNormal: Distribution<R>,
{
    if n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    if !eta0.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    vol.validate_volatility(&model.grid)?;
    let grid = model.grid;
    let n = grid.steps();
    let dt = grid.dt();
    let b_cells = drift.cell_values(&grid);
    let mut sd = vec![R::zero(); n];
    let mut prev = R::zero();
    for (i, s) in sd.iter_mut().enumerate() {
        let norm = sigma_norm_sq(model, vol, grid.node(i + 1))?;
        *s = (norm - prev).max(R::zero()).sqrt();
        prev = norm;
    }
    let mut values = PathMatrix::zeros(n_paths, n + 1);
    values.par_rows_mut().for_each(|(p, row)| {
        let mut rng = path_rng(seed, p);
        row[0] = eta0;
        for i in 0..n {
            let g: R = rng.sample(StandardNormal);
            row[i + 1] = row[i] + b_cells[i] * dt + sd[i] * g;
        }
    });
    Ok(ForwardEnsemble { model: *model, eta0, values })
}

/// Precomputed Durbin-Levinson state for unit-spaced fractional Gaussian
/// noise: prediction coefficients `phi[n]` and innovation variances `v[n]`
/// are path-independent, so they are built once and shared read-only.
struct HoskingRecursion<R: Real> {
    phi: Matrix<R>,
    v_sqrt: Vec<R>,
}

impl<R: Real> HoskingRecursion<R> {
    fn new(model: &FbmModel<R>) -> Result<Self> {
        let n = model.grid.steps();
        let two_h = model.hurst.two_h();
        // autocovariance of unit-spaced fGn
        let gamma: Vec<R> = (0..n)
            .map(|k| {
                let k = R::from_index(k);
                R::of(0.5)
                    * ((k + R::one()).abs_powf(two_h) - (R::one() + R::one()) * k.abs_powf(two_h)
                        + (k - R::one()).abs_powf(two_h))
            })
            .collect();
        let mut phi = Matrix::zeros(n, n);
        let mut v = vec![R::zero(); n];
        v[0] = gamma[0];
        if n > 1 {
            *phi.at_mut(1, 1) = gamma[1] / gamma[0];
            v[1] = v[0] * (R::one() - phi.at(1, 1) * phi.at(1, 1));
        }
        for m in 2..n {
            let mut num = gamma[m];
            for j in 1..m {
                num -= phi.at(m - 1, j) * gamma[m - j];
            }
            if !(v[m - 1] > R::zero()) || !v[m - 1].is_finite() {
                return Err(Error::VarianceUnderflow { step: m - 1, value: v[m - 1].f64() });
            }
            let refl = num / v[m - 1];
            *phi.at_mut(m, m) = refl;
            for j in 1..m {
                *phi.at_mut(m, j) = phi.at(m - 1, j) - refl * phi.at(m - 1, m - j);
            }
            v[m] = v[m - 1] * (R::one() - refl * refl);
        }
        for (step, &vm) in v.iter().enumerate() {
            if !(vm > R::zero()) || !vm.is_finite() {
                return Err(Error::VarianceUnderflow { step, value: vm.f64() });
            }
        }
        Ok(HoskingRecursion { phi, v_sqrt: v.into_iter().map(|x| x.sqrt()).collect() })
    }

    fn sample_into(&self, rng: &mut ChaCha12Rng, out: &mut [R])
    where
        StandardNormal: Distribution<R>,
    {
        let n = out.len();
        for m in 0..n {
            let z: R = rng.sample(StandardNormal);
            let mut mean = R::zero();
            for j in 1..=m {
                mean += self.phi.at(m, j) * out[m - j];
            }
            out[m] = mean + self.v_sqrt[m] * z;
        }
    }
}
