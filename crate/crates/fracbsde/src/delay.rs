//! Delayed backward equations: problem container, admissibility constants,
//! the backward regression sweep against frozen delayed arguments, and the
//! Picard fixed-point driver.

use std::time::Instant;

use crate::coeff::{DeterministicFn, TerminalMap};
use crate::diagnostics::{weighted_distance_sq, weighted_norm_y};
use crate::error::{Error, Result};
use crate::generator::{GenArgs, GeneratorSpec};
use crate::grid::{FbmModel, HurstParam};
use crate::kernel::{sigma_hat, sigma_hat_lagged, KernelConstants};
use crate::numeric::Real;
use crate::paths::{ForwardEnsemble, PathMatrix};
use crate::regression::{fit_conditional, StepFit};
use crate::solution::{IterationTrace, PicardSolution, Provenance, SolutionEnsemble, TraceEntry};

/// Backward equation with a delayed generator:
/// `Y` on `[0, T]` driven by `f(t, eta_t, Y_t, Z_t, Y_{t-delta}, Z_{t-delta})`,
/// terminal `Y_T = h(eta_T)`, and prescribed `(phi0, psi0)` on `[-delta, 0)`.
#[derive(Debug, Clone)]
pub struct DelayedBsdeProblem<R: Real> {
    pub model: FbmModel<R>,
    pub eta0: R,
    pub drift: DeterministicFn<R>,
    pub vol: DeterministicFn<R>,
    pub terminal: TerminalMap<R>,
    pub gen: GeneratorSpec<R>,
    pub phi0: DeterministicFn<R>,
    pub psi0: DeterministicFn<R>,
    pub constants: KernelConstants<R>,
}

impl<R: Real> DelayedBsdeProblem<R> {
    pub fn validate(&self) -> Result<()> {
        if !self.eta0.is_finite() {
            return Err(Error::invalid("initial state must be finite"));
        }
        self.vol.validate_volatility(&self.model.grid)?;
        if self.gen.depends.any_delay() && self.model.grid.delay_steps() == 0 {
            return Err(Error::invalid(
                "generator reads delayed arguments but the grid has zero delay",
            ));
        }
        Ok(())
    }

    pub fn delta(&self) -> R {
        self.model.grid.delay()
    }
}

/// Which contraction regime the admissibility constants serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmissibleMode {
    /// Existence / uniqueness of the fixed point.
    Existence,
    /// The stronger constants used by the monotone comparison iteration.
    Comparison,
}

/// Explicit admissibility constants: the norm weight
/// `beta = c L M e + 4 / M` with `c = 2` (existence) or `c = 8`
/// (comparison), and the delay bound `delta_max = 1 / beta`.
pub fn admissible_delay<R: Real>(
    lipschitz: R,
    m_bound: R,
    mode: AdmissibleMode,
) -> Result<(R, R)> {
    if !(m_bound > R::of(2.0)) || !m_bound.is_finite() {
        return Err(Error::invalid(format!("ratio bound must exceed 2, got {m_bound}")));
    }
    if !(lipschitz >= R::zero()) || !lipschitz.is_finite() {
        return Err(Error::invalid(format!(
            "Lipschitz constant must be >= 0, got {lipschitz}"
        )));
    }
    let c = match mode {
        AdmissibleMode::Existence => R::of(2.0),
        AdmissibleMode::Comparison => R::of(8.0),
    };
    let beta = c * lipschitz * m_bound * R::E() + R::of(4.0) / m_bound;
    Ok((beta, beta.recip()))
}

/// Largest horizon certified by the small-horizon contraction route: the
/// supremum of `T` with
/// `(8 L^3 / v) M e^{bT} (T + 2 T^{2-2H} / (2-2H))^2 < 1/4` and
/// `L M v e^{bT} < 1/4`, capped at 1000 and found by bisection on the
/// log-scale predicate (both sides are monotone in `T`).
pub fn admissible_horizon<R: Real>(
    lipschitz: R,
    m_bound: R,
    hurst: HurstParam<R>,
    beta: R,
    v: R,
) -> Result<R> {
    if !(lipschitz > R::zero()) || !lipschitz.is_finite() {
        return Err(Error::invalid("horizon bound needs L > 0"));
    }
    if !(m_bound > R::of(2.0)) {
        return Err(Error::invalid("horizon bound needs M > 2"));
    }
    if !(beta > R::one()) || !beta.is_finite() {
        return Err(Error::invalid("horizon bound needs beta > 1"));
    }
    if !(v > R::zero()) || !v.is_finite() {
        return Err(Error::invalid("horizon bound needs v > 0"));
    }
    let cap = R::of(1000.0);
    let quarter_ln = R::of(0.25).ln();
    let two = R::of(2.0);
    let gap = two - hurst.two_h();
    let holds = |t: R| -> bool {
        // log-space keeps L -> 0 and large beta T from overflowing
        let bracket = t + two * t.abs_powf(gap) / gap;
        let i1 = R::of(8.0).ln() + R::of(3.0) * lipschitz.ln() - v.ln() + m_bound.ln()
            + beta * t
            + two * bracket.ln();
        let i2 = lipschitz.ln() + m_bound.ln() + v.ln() + beta * t;
        i1 < quarter_ln && i2 < quarter_ln
    };
    let mut lo = R::of(1e-12);
    if !holds(lo) {
        return Err(Error::Infeasible(
            "no positive horizon satisfies the contraction inequalities".into(),
        ));
    }
    if holds(cap) {
        return Ok(cap);
    }
    let mut hi = cap;
    for _ in 0..200 {
        let mid = R::of(0.5) * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Default auxiliary constant for the horizon route, sized so the second
/// inequality reads `e^{beta (T - 1)} / 8 < 1/4`.
pub fn default_horizon_v<R: Real>(lipschitz: R, m_bound: R, beta: R) -> R {
    (R::of(8.0) * lipschitz * m_bound * beta.exp()).recip()
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<R: Real> {
    /// Absolute tolerance on the squared iteration distance;
    /// `None` resolves to `1e-6 (1 + ||Y||)` after the first sweep.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub basis_degree: usize,
    pub ridge: R,
}

impl<R: Real> Default for SolverConfig<R> {
    fn default() -> Self {
        SolverConfig { tol: None, max_iter: 50, basis_degree: 2, ridge: R::of(1e-8) }
    }
}

fn check_forward<R: Real>(problem: &DelayedBsdeProblem<R>, fwd: &ForwardEnsemble<R>) -> Result<()> {
    if fwd.model.grid != problem.model.grid {
        return Err(Error::invalid("forward ensemble grid does not match the problem"));
    }
    if fwd.values.n_paths() < 2 {
        return Err(Error::invalid("regression sweep needs at least two paths"));
    }
    Ok(())
}

/// One backward sweep with the delayed arguments frozen at `frozen`.
///
/// At each interior node the conditional expectation of the next `Y` given
/// the current and delayed state is fitted cross-sectionally; `Z` comes from
/// the fitted slopes via
/// `Z_t = sigma_t (d1 + (r_t / sigma_hat_t) d2)`,
/// with `r_t` the delayed occupation weight. The time-zero step uses the
/// plain ensemble mean (the state is deterministic there) and reuses the
/// first interior fit for its slope. The boolean reports whether any frozen
/// value on `[0, T]` was actually consulted; when it never was, one sweep
/// already solves the equation.
pub fn inner_step<R: Real>(
    problem: &DelayedBsdeProblem<R>,
    fwd: &ForwardEnsemble<R>,
    frozen: &SolutionEnsemble<R>,
    cfg: &SolverConfig<R>,
) -> Result<(SolutionEnsemble<R>, bool)> {
    check_forward(problem, fwd)?;
    let grid = problem.model.grid;
    if frozen.grid != grid || frozen.n_paths() != fwd.values.n_paths() {
        return Err(Error::invalid("frozen iterate shape does not match the problem"));
    }
    let n = grid.steps();
    let k = grid.delay_steps();
    let n_paths = fwd.values.n_paths();
    let dt = grid.dt();
    let delta = grid.delay();

    let mut ens = SolutionEnsemble::from_segments(
        grid,
        n_paths,
        &problem.phi0,
        &problem.psi0,
        Provenance::RegressionSweep,
    )?;

    let sig_nodes = problem.vol.node_values(&grid);
    let c_term = ens.col(n as isize);
    for p in 0..n_paths {
        let x = fwd.values.at(p, n);
        *ens.y.at_mut(p, c_term) = problem.terminal.eval(x);
        *ens.z.at_mut(p, c_term) = sig_nodes[n] * problem.terminal.derivative(x);
    }

    // slope weight of the delayed coordinate: r_t / sigma_hat_t
    let lag_weight: Vec<R> = (0..=n)
        .map(|i| {
            if k == 0 {
                return R::zero();
            }
            let t = grid.node(i);
            let shat = sigma_hat(&problem.model, &problem.vol, t);
            if shat.abs() > R::of(1e-300) {
                sigma_hat_lagged(&problem.model, &problem.vol, t, delta) / shat
            } else {
                R::zero()
            }
        })
        .collect();

    let depends_delay = problem.gen.depends.any_delay();
    let mut consulted = false;
    let mut last_fit: Option<StepFit<R>> = None;
    let mut ehat = vec![R::zero(); n_paths];
    let mut zcol = vec![R::zero(); n_paths];
    for i in (0..n).rev() {
        let y_next = ens.y.column(ens.col(i as isize + 1));
        let x1 = fwd.values.column(i);
        let x2: Option<Vec<R>> = (k > 0).then(|| fwd.values.column(i.saturating_sub(k)));
        if i >= 1 {
            let fit =
                fit_conditional(cfg.basis_degree, &x1, x2.as_deref(), &y_next, cfg.ridge, i)?;
            for p in 0..n_paths {
                let a = x1[p];
                let b = x2.as_ref().map_or(R::zero(), |v| v[p]);
                ehat[p] = fit.predict(a, b);
                let (d1, d2) = fit.gradient(a, b);
                zcol[p] = sig_nodes[i] * (d1 + lag_weight[i] * d2);
            }
            last_fit = Some(fit);
        } else {
            // deterministic initial state: conditional expectation is the
            // plain mean, slope borrowed from the first interior fit
            let mut mean = R::zero();
            for &v in &y_next {
                mean += v;
            }
            mean /= R::from_index(n_paths);
            let (d1, d2) = match &last_fit {
                Some(fit) => {
                    fit.gradient(x1[0], x2.as_ref().map_or(R::zero(), |v| v[0]))
                }
                None => (R::zero(), R::zero()),
            };
            let z0 = sig_nodes[0] * (d1 + lag_weight[0] * d2);
            for p in 0..n_paths {
                ehat[p] = mean;
                zcol[p] = z0;
            }
        }
        let j = i as isize - k as isize;
        if depends_delay && j >= 0 {
            consulted = true;
        }
        let t_i = grid.node(i);
        let ci = ens.col(i as isize);
        for p in 0..n_paths {
            let (yd, zd) = if k > 0 {
                (frozen.y_at(p, j), frozen.z_at(p, j))
            } else {
                (R::zero(), R::zero())
            };
            let args = GenArgs {
                t: t_i,
                x: fwd.values.at(p, i),
                y: ehat[p],
                z: zcol[p],
                y_delay: yd,
                z_delay: zd,
            };
            let fv = problem.gen.eval(args);
            if !fv.is_finite() {
                return Err(Error::NonFiniteGenerator { t: t_i.f64() });
            }
            *ens.y.at_mut(p, ci) = ehat[p] + fv * dt;
            *ens.z.at_mut(p, ci) = zcol[p];
        }
    }
    Ok((ens, consulted))
}

/// Picard iteration on the delayed generator, starting from the zero
/// solution (with prescribed segment). Distances between iterates use the
/// admissible weight when the problem is admissible, else the declared
/// `beta`. Generators that never consult the frozen iterate converge in one
/// sweep by construction; that sweep is recorded with distance zero.
pub fn solve_delayed_picard<R: Real>(
    problem: &DelayedBsdeProblem<R>,
    fwd: &ForwardEnsemble<R>,
    cfg: &SolverConfig<R>,
) -> Result<PicardSolution<R>> {
    problem.validate()?;
    check_forward(problem, fwd)?;
    let grid = problem.model.grid;
    let hurst = problem.model.hurst;
    let l = problem.constants.lipschitz;
    let m = problem.constants.m;
    let (beta_adm, delta_max) = admissible_delay(l, m, AdmissibleMode::Existence)?;
    let tol_t = grid.dt() * R::of(1e-9);
    let by_delay = grid.delay() <= delta_max + tol_t;
    let by_horizon = l == R::zero()
        || (beta_adm > R::one()
            && admissible_horizon(l, m, hurst, beta_adm, default_horizon_v(l, m, beta_adm))
                .map(|t_max| grid.horizon() <= t_max + tol_t)
                .unwrap_or(false));
    let admissible = by_delay || by_horizon;
    let norm_beta = if admissible { beta_adm } else { problem.constants.beta };

    let mut prev = SolutionEnsemble::from_segments(
        grid,
        fwd.values.n_paths(),
        &problem.phi0,
        &problem.psi0,
        Provenance::Exogenous,
    )?;
    let mut trace = IterationTrace::default();
    let mut converged = false;
    let mut one_pass = false;
    let mut tol_abs = cfg.tol;
    for iter in 1..=cfg.max_iter {
        let start = Instant::now();
        let (next, consulted) = inner_step(problem, fwd, &prev, cfg)?;
        let seconds = start.elapsed().as_secs_f64();
        if iter == 1 && !consulted {
            trace.entries.push(TraceEntry { distance: 0.0, ratio: None, seconds });
            prev = next;
            converged = true;
            one_pass = true;
            break;
        }
        let d = weighted_distance_sq(&next, &prev, norm_beta, hurst)?.f64();
        trace.push(d, seconds);
        if tol_abs.is_none() {
            let ny = weighted_norm_y(&next.times, &next.y, norm_beta)?.f64();
            tol_abs = Some(1e-6 * (1.0 + ny));
        }
        prev = next;
        if d <= tol_abs.unwrap_or(0.0) {
            converged = true;
            break;
        }
        if iter == cfg.max_iter {
            let e = &trace.entries;
            if e.len() >= 3 {
                let tail = &e[e.len() - 3..];
                if tail[1].distance >= tail[0].distance && tail[2].distance >= tail[1].distance {
                    return Err(Error::Diverged { iterations: iter, last: d });
                }
            }
        }
    }
    let certified = admissible
        && (one_pass
            || (converged
                && trace
                    .ratios()
                    .last()
                    .is_some_and(|&r| r <= 0.5 + 1e-9)));
    Ok(PicardSolution {
        ensemble: prev,
        trace,
        admissible,
        certified,
        converged,
        norm_beta: norm_beta.f64(),
    })
}

/// Generator values realized along a solved ensemble, used by the energy
/// inequality diagnostics.
pub fn realized_generator_values<R: Real>(
    problem: &DelayedBsdeProblem<R>,
    fwd: &ForwardEnsemble<R>,
    sol: &SolutionEnsemble<R>,
) -> Result<PathMatrix<R>> {
    check_forward(problem, fwd)?;
    let grid = problem.model.grid;
    let n = grid.steps();
    let k = grid.delay_steps();
    let n_paths = fwd.values.n_paths();
    let mut out = PathMatrix::zeros(n_paths, n + 1);
    for i in 0..=n {
        let t = grid.node(i);
        let j = i as isize - k as isize;
        for p in 0..n_paths {
            let (yd, zd) = if k > 0 {
                (sol.y_at(p, j), sol.z_at(p, j))
            } else {
                (R::zero(), R::zero())
            };
            let args = GenArgs {
                t,
                x: fwd.values.at(p, i),
                y: sol.y_at(p, i as isize),
                z: sol.z_at(p, i as isize),
                y_delay: yd,
                z_delay: zd,
            };
            let fv = problem.gen.eval(args);
            if !fv.is_finite() {
                return Err(Error::NonFiniteGenerator { t: t.f64() });
            }
            *out.at_mut(p, i) = fv;
        }
    }
    Ok(out)
}
