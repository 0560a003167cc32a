//! Markovian core: the terminal-value PDE
//! `du/dt + sigma_hat_t sigma_t u_xx + b_t u_x + g(t,x) = 0`, `u(T,.) = h`,
//! its quasi-expectation closed form for `g = 0`, and evaluation of the
//! resulting field along simulated forward paths.

use crate::coeff::{DeterministicFn, TerminalMap};
use crate::error::{Error, Result};
use crate::ghq::GaussHermite;
use crate::grid::{FbmModel, TimeGrid};
use crate::kernel::sigma_norm_sq;
use crate::linalg::{thomas_solve, Matrix};
use crate::numeric::Real;
use crate::paths::{ForwardEnsemble, PathMatrix};

/// Fraction of path evaluations allowed to fall outside the spatial domain.
const EXTRAPOLATION_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub struct PdeConfig<R: Real> {
    /// Number of spatial cells.
    pub space_cells: usize,
    /// Lower bound on time steps; rounded up to a multiple of the model
    /// grid so every model node is a PDE node.
    pub min_time_steps: usize,
    /// Domain half-width around the drift envelope, in units of the
    /// terminal kernel norm of the volatility.
    pub width: R,
}

impl<R: Real> Default for PdeConfig<R> {
    fn default() -> Self {
        PdeConfig { space_cells: 400, min_time_steps: 400, width: R::of(6.0) }
    }
}

/// Crank-Nicolson solution on a uniform space-time lattice.
#[derive(Debug, Clone)]
pub struct ValueField<R: Real> {
    pub times: Vec<R>,
    pub xs: Vec<R>,
    pub u: Matrix<R>,
    pub ux: Matrix<R>,
    /// PDE time steps per model cell; model node `i` sits at row `i * stride`.
    pub stride: usize,
}

impl<R: Real> ValueField<R> {
    pub fn model_row(&self, i: usize) -> usize {
        i * self.stride
    }

    pub fn value_at(&self, row: usize, x: R) -> R {
        lagrange4(&self.xs, self.u.row(row), x)
    }

    pub fn slope_at(&self, row: usize, x: R) -> R {
        lagrange4(&self.xs, self.ux.row(row), x)
    }
}

/// Four-point Lagrange interpolation on a uniform abscissa; outside the
/// range it extrapolates with the boundary stencil.
fn lagrange4<R: Real>(xs: &[R], ys: &[R], x: R) -> R {
    let n = xs.len();
    debug_assert!(n >= 4);
    let dx = xs[1] - xs[0];
    let cell = ((x - xs[0]) / dx).f64().floor() as isize;
    let base = (cell - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = R::zero();
    for k in 0..4 {
        let xk = xs[base + k];
        let mut term = ys[base + k];
        for l in 0..4 {
            if l != k {
                let xl = xs[base + l];
                term *= (x - xl) / (xk - xl);
            }
        }
        acc += term;
    }
    acc
}

/// Midpoint-rule integral of a deterministic coefficient over `[a, b]`,
/// split on the grid cells; exact for piecewise-constant and affine pieces.
fn integrate_midpoint<R: Real>(f: &DeterministicFn<R>, grid: &TimeGrid<R>, a: R, b: R) -> R {
    if b <= a {
        return R::zero();
    }
    let tol = grid.dt() * R::of(1e-9);
    let mut bounds = vec![a];
    for i in 0..=grid.steps() {
        let node = grid.node(i);
        if node > a + tol && node < b - tol {
            bounds.push(node);
        }
    }
    bounds.push(b);
    let half = R::of(0.5);
    let mut acc = R::zero();
    for w in bounds.windows(2) {
        acc += f.eval(half * (w[0] + w[1])) * (w[1] - w[0]);
    }
    acc
}

/// Conditional expectation of `h` under the Gaussian transition law:
/// mean `x + int_t^T b`, variance `||sigma||_T^2 - ||sigma||_t^2`.
/// Collapses to `h` itself when the variance degenerates.
pub fn quasi_expectation<R: Real>(
    model: &FbmModel<R>,
    drift: &DeterministicFn<R>,
    vol: &DeterministicFn<R>,
    terminal: &TerminalMap<R>,
    t: R,
    x: R,
) -> Result<R> {
    let horizon = model.grid.horizon();
    if t < R::zero() || t > horizon * (R::one() + R::of(1e-12)) {
        return Err(Error::invalid(format!("time {t} outside [0, {horizon}]")));
    }
    let mean = x + integrate_midpoint(drift, &model.grid, t, horizon);
    let var = sigma_norm_sq(model, vol, horizon)? - sigma_norm_sq(model, vol, t)?;
    let floor = R::of(1e-30) * (R::one() + sigma_norm_sq(model, vol, horizon)?);
    if var <= floor {
        return Ok(terminal.eval(mean));
    }
    let rule = GaussHermite::new(64)?;
    Ok(rule.expect_normal(mean, var.sqrt(), |y| terminal.eval(y)))
}

/// Crank-Nicolson backward solve. The diffusion coefficient is replaced on
/// each time cell by its exact average,
/// `(||sigma||^2(t_{m+1}) - ||sigma||^2(t_m)) / (2 dt)`,
/// which keeps the integrated variance exact including the first cell where
/// `sigma_hat` is singular in slope. Dirichlet boundaries pin `u` to the
/// terminal map; the domain is wide enough that the mismatch stays inside
/// the Gaussian tail.
pub fn solve_markovian_pde<R: Real>(
    model: &FbmModel<R>,
    eta0: R,
    drift: &DeterministicFn<R>,
    vol: &DeterministicFn<R>,
    terminal: &TerminalMap<R>,
    source: Option<&(dyn Fn(R, R) -> R + Sync)>,
    cfg: &PdeConfig<R>,
) -> Result<ValueField<R>> {
    vol.validate_volatility(&model.grid)?;
    if cfg.space_cells < 8 {
        return Err(Error::invalid("need at least 8 spatial cells"));
    }
    if !(cfg.width > R::zero()) {
        return Err(Error::invalid("domain width must be positive"));
    }
    let n_model = model.grid.steps();
    let stride = cfg.min_time_steps.div_ceil(n_model).max(1);
    let n_time = stride * n_model;
    let fine = TimeGrid::new(model.grid.horizon(), n_time, 0)?;
    let times: Vec<R> = fine.nodes();

    let nsq: Vec<R> = times
        .iter()
        .map(|&t| sigma_norm_sq(model, vol, t))
        .collect::<Result<_>>()?;

    // drift envelope on the model grid, midpoint rule per cell
    let dt_model = model.grid.dt();
    let half = R::of(0.5);
    let mut mean = eta0;
    let (mut lo, mut hi) = (eta0, eta0);
    for i in 0..n_model {
        let mid = half * (model.grid.node(i) + model.grid.node(i + 1));
        mean += drift.eval(mid) * dt_model;
        lo = lo.min(mean);
        hi = hi.max(mean);
    }
    let sig_t = nsq[n_time].sqrt();
    let x_lo = lo - cfg.width * sig_t;
    let x_hi = hi + cfg.width * sig_t;
    let j_cells = cfg.space_cells;
    let dx = (x_hi - x_lo) / R::from_index(j_cells);
    let xs: Vec<R> = (0..=j_cells)
        .map(|j| x_lo + dx * R::from_index(j))
        .collect();

    let mut u = Matrix::zeros(n_time + 1, j_cells + 1);
    for j in 0..=j_cells {
        *u.at_mut(n_time, j) = terminal.eval(xs[j]);
    }
    let (bc_lo, bc_hi) = (terminal.eval(x_lo), terminal.eval(x_hi));

    let dtau = fine.dt();
    let mut next = vec![R::zero(); j_cells + 1];
    let mut sub = vec![R::zero(); j_cells - 1];
    let mut diag = vec![R::zero(); j_cells - 1];
    let mut sup = vec![R::zero(); j_cells - 1];
    let mut rhs = vec![R::zero(); j_cells - 1];
    for m in (0..n_time).rev() {
        next.copy_from_slice(u.row(m + 1));
        // exact cell average of sigma_hat * sigma; clamp tiny negative rounding
        let a_bar = ((nsq[m + 1] - nsq[m]) / (dtau + dtau)).max(R::zero());
        let b_bar = drift.eval(half * (times[m] + times[m + 1]));
        let lam = a_bar * dtau / (dx * dx);
        let mu = b_bar * dtau / (dx + dx);
        let s_lo = (lam - mu) * half;
        let s_hi = (lam + mu) * half;
        for j in 1..j_cells {
            sub[j - 1] = -s_lo;
            diag[j - 1] = R::one() + lam;
            sup[j - 1] = -s_hi;
            let explicit = half
                * (lam * (next[j + 1] - (next[j] + next[j]) + next[j - 1])
                    + mu * (next[j + 1] - next[j - 1]));
            let g_bar = match source {
                Some(g) => half * (g(times[m], xs[j]) + g(times[m + 1], xs[j])),
                None => R::zero(),
            };
            rhs[j - 1] = next[j] + explicit + dtau * g_bar;
        }
        rhs[0] += s_lo * bc_lo;
        rhs[j_cells - 2] += s_hi * bc_hi;
        thomas_solve(&sub, &diag, &sup, &mut rhs)?;
        *u.at_mut(m, 0) = bc_lo;
        for j in 1..j_cells {
            *u.at_mut(m, j) = rhs[j - 1];
        }
        *u.at_mut(m, j_cells) = bc_hi;
        let finite = u.row(m).iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::numerical(format!(
                "PDE row {m} went non-finite; coefficients too stiff for the lattice"
            )));
        }
    }

    // spatial slope: centered interior, one-sided 3-point at the walls
    let mut ux = Matrix::zeros(n_time + 1, j_cells + 1);
    let two_dx = dx + dx;
    for m in 0..=n_time {
        let row: Vec<R> = u.row(m).to_vec();
        *ux.at_mut(m, 0) =
            (-R::of(3.0) * row[0] + R::of(4.0) * row[1] - row[2]) / two_dx;
        for j in 1..j_cells {
            *ux.at_mut(m, j) = (row[j + 1] - row[j - 1]) / two_dx;
        }
        *ux.at_mut(m, j_cells) = (R::of(3.0) * row[j_cells] - R::of(4.0) * row[j_cells - 1]
            + row[j_cells - 2])
            / two_dx;
    }

    Ok(ValueField { times, xs, u, ux, stride })
}

/// Field restricted to simulated paths: `Y = u(t, eta_t)` and
/// `Z = sigma_t u_x(t, eta_t)`.
#[derive(Debug, Clone)]
pub struct FieldOnPaths<R: Real> {
    pub y: PathMatrix<R>,
    pub z: PathMatrix<R>,
    pub extrapolated_fraction: f64,
}

/// Evaluates a field along forward paths at the model nodes. Errors out if
/// more than one percent of the lookups leave the spatial domain; such a
/// field was solved on too narrow a box to trust.
pub fn evaluate_on_paths<R: Real>(
    field: &ValueField<R>,
    fwd: &ForwardEnsemble<R>,
    vol: &DeterministicFn<R>,
) -> Result<FieldOnPaths<R>> {
    let grid = fwd.model.grid;
    let n = grid.steps();
    if field.times.len() != field.stride * n + 1 {
        return Err(Error::invalid("field and ensemble time grids do not match"));
    }
    let n_paths = fwd.values.n_paths();
    let s_nodes = vol.node_values(&grid);
    let mut y = PathMatrix::zeros(n_paths, n + 1);
    let mut z = PathMatrix::zeros(n_paths, n + 1);
    let (x_lo, x_hi) = (field.xs[0], *field.xs.last().unwrap());
    let mut outside = 0usize;
    for p in 0..n_paths {
        for i in 0..=n {
            let x = fwd.values.at(p, i);
            if x < x_lo || x > x_hi {
                outside += 1;
            }
            let row = field.model_row(i);
            *y.at_mut(p, i) = field.value_at(row, x);
            *z.at_mut(p, i) = s_nodes[i] * field.slope_at(row, x);
        }
    }
    let fraction = outside as f64 / (n_paths * (n + 1)) as f64;
    if fraction > EXTRAPOLATION_LIMIT {
        return Err(Error::DomainTruncation { fraction, limit: EXTRAPOLATION_LIMIT });
    }
    Ok(FieldOnPaths { y, z, extrapolated_fraction: fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::HurstParam;

    fn model(h: f64, horizon: f64, steps: usize) -> FbmModel<f64> {
        FbmModel::new(
            HurstParam::new(h).unwrap(),
            TimeGrid::new(horizon, steps, 0).unwrap(),
        )
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0 * x - 1.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for &x in &[0.1, 1.27, 3.9, 4.99, 0.0, 5.0] {
            let got = lagrange4(&xs, &ys, x);
            assert!((got - f(x)).abs() < 1e-12, "x={x}: {got} vs {}", f(x));
        }
    }

    #[test]
    fn midpoint_integral_exact_for_affine() {
        let grid = TimeGrid::new(1.0f64, 8, 0).unwrap();
        let f = DeterministicFn::affine(1.0, 2.0);
        // int_a^b (1 + 2t) dt = (b - a) + (b^2 - a^2)
        let got = integrate_midpoint(&f, &grid, 0.3, 0.9);
        let expect = 0.6 + (0.81 - 0.09);
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn quasi_expectation_gaussian_closed_forms() {
        let m = model(0.75, 1.0, 64);
        let b = DeterministicFn::constant(0.5);
        let s = DeterministicFn::constant(1.0);
        // variance between t and T is T^{2H} - t^{2H}
        let t = 0.25f64;
        let var = 1.0 - t.powf(1.5);
        let mean = 2.0 + 0.5 * (1.0 - t);
        let got_id = quasi_expectation(&m, &b, &s, &TerminalMap::identity(), t, 2.0).unwrap();
        assert!((got_id - mean).abs() < 1e-12);
        let got_sq = quasi_expectation(&m, &b, &s, &TerminalMap::square(), t, 2.0).unwrap();
        assert!((got_sq - (mean * mean + var)).abs() < 1e-11, "{got_sq}");
        let got_q4 = quasi_expectation(&m, &b, &s, &TerminalMap::quartic(), t, 2.0).unwrap();
        let expect_q4 = mean.powi(4) + 6.0 * mean * mean * var + 3.0 * var * var;
        assert!((got_q4 - expect_q4).abs() < 1e-9, "{got_q4} vs {expect_q4}");
        // degenerate interval collapses to h(x + drift integral)
        let at_t = quasi_expectation(&m, &b, &s, &TerminalMap::square(), 1.0, 2.0).unwrap();
        assert_eq!(at_t, 4.0);
    }

    #[test]
    fn constant_source_matches_linear_decay() {
        let m = model(0.75, 0.5, 16);
        let zero = DeterministicFn::constant(0.0);
        let one = DeterministicFn::constant(1.0);
        let h = TerminalMap::with_derivative("zero", |_| 0.0, |_| 0.0);
        let g = |_t: f64, _x: f64| 2.0f64;
        let field = solve_markovian_pde(
            &m,
            0.0,
            &zero,
            &one,
            &h,
            Some(&g),
            &PdeConfig { space_cells: 64, min_time_steps: 32, width: 6.0 },
        )
        .unwrap();
        // u(t, x) = 2 (T - t) for zero terminal and constant source; the
        // walls pin u to the terminal map, so a ~1e-9 mismatch leaks in
        // from the Dirichlet boundary
        let mid = field.xs.len() / 2;
        for (m_row, &t) in field.times.iter().enumerate() {
            let got = field.u.at(m_row, mid);
            let expect = 2.0 * (0.5 - t);
            assert!((got - expect).abs() < 2e-8, "t={t}: {got} vs {expect}");
        }
    }

    #[test]
    fn quadratic_terminal_is_exact_at_the_money() {
        let m = model(0.75, 1.0, 32);
        let field = solve_markovian_pde(
            &m,
            0.0,
            &DeterministicFn::constant(0.0),
            &DeterministicFn::constant(1.0),
            &TerminalMap::square(),
            None,
            &PdeConfig { space_cells: 200, min_time_steps: 128, width: 6.0 },
        )
        .unwrap();
        // closed form u(t, x) = x^2 + T^{2H} - t^{2H}; scheme is exact up to
        // boundary leakage deep in the Gaussian tail
        let got = field.value_at(0, 0.0);
        assert!((got - 1.0).abs() < 1e-6, "u(0,0) = {got}");
        let row = field.model_row(16);
        let t = m.grid.node(16);
        let got_mid = field.value_at(row, 0.5);
        let expect = 0.25 + 1.0 - t.powf(1.5);
        assert!((got_mid - expect).abs() < 1e-6, "{got_mid} vs {expect}");
    }

    #[test]
    fn path_evaluation_keeps_slope_volatility_ratio() {
        let m = model(0.75, 1.0, 8);
        let vol = DeterministicFn::affine(1.0, 0.5);
        let field = solve_markovian_pde(
            &m,
            0.0,
            &DeterministicFn::constant(0.0),
            &vol,
            &TerminalMap::square(),
            None,
            &PdeConfig { space_cells: 64, min_time_steps: 16, width: 6.0 },
        )
        .unwrap();
        let paths = crate::sampler::sample_paths(&m, 32, 5, crate::sampler::SampleMethod::Cholesky)
            .unwrap();
        let fwd = crate::paths::simulate_forward(
            &paths,
            0.0,
            &DeterministicFn::constant(0.0),
            &vol,
        )
        .unwrap();
        let on_paths = evaluate_on_paths(&field, &fwd, &vol).unwrap();
        for p in 0..32 {
            for i in 0..=8 {
                let x = fwd.values.at(p, i);
                let row = field.model_row(i);
                let slope = field.slope_at(row, x);
                if slope.abs() > 1e-8 {
                    let ratio = on_paths.z.at(p, i) / slope;
                    let sig = vol.eval(m.grid.node(i));
                    assert!((ratio - sig).abs() < 1e-12, "path {p} node {i}");
                }
            }
        }
        assert!(on_paths.extrapolated_fraction <= 0.01);
    }

    #[test]
    fn narrow_domain_triggers_truncation_error() {
        let m = model(0.75, 1.0, 8);
        let vol = DeterministicFn::constant(1.0);
        let field = solve_markovian_pde(
            &m,
            0.0,
            &DeterministicFn::constant(0.0),
            &vol,
            &TerminalMap::identity(),
            None,
            &PdeConfig { space_cells: 16, min_time_steps: 8, width: 0.05 },
        )
        .unwrap();
        let paths = crate::sampler::sample_paths(&m, 256, 9, crate::sampler::SampleMethod::Cholesky)
            .unwrap();
        let fwd = crate::paths::simulate_forward(
            &paths,
            0.0,
            &DeterministicFn::constant(0.0),
            &vol,
        )
        .unwrap();
        match evaluate_on_paths(&field, &fwd, &vol) {
            Err(Error::DomainTruncation { fraction, .. }) => assert!(fraction > 0.01),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }
}
