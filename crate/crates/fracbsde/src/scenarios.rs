//! Built-in scenario library: named experiment setups with fixed seeds and
//! closed-form or statistical oracle checks, plus the shared run pipeline
//! the command line drives.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};

use crate::coeff::{DeterministicFn, TerminalMap};
use crate::compare::{solve_comparison_sequence, ComparisonConfig, ComparisonOutcome};
use crate::delay::{
    realized_generator_values, solve_delayed_picard, DelayedBsdeProblem, SolverConfig,
};
use crate::diagnostics::{apriori_estimate_check, isometry_battery, AprioriReport, BatterySummary};
use crate::error::{Error, Result};
use crate::generator::{GenArgs, GeneratorSpec};
use crate::grid::{FbmModel, HurstParam, TimeGrid};
use crate::kernel::KernelConstants;
use crate::numeric::Real;
use crate::paths::ForwardEnsemble;
use crate::pde::{evaluate_on_paths, solve_markovian_pde, PdeConfig, ValueField};
use crate::sampler::{sample_paths, simulate_forward_quasi, SampleMethod};
use crate::solution::PicardSolution;

pub const SCENARIO_LIST: [(&str, &str); 8] = [
    ("zero_generator", "f = 0, identity terminal: Y0 equals the initial state"),
    ("quadratic_terminal", "f = 0, square terminal: Y0 equals T^{2H}"),
    ("linear_y", "f = a y: Y0 equals e^{aT} eta0"),
    ("delay_ge_T", "delay equals horizon: one sweep solves, Y = eta + (T - t)"),
    ("certified_contraction", "delay under the admissible bound: geometric Picard decay"),
    ("example43", "ordered generator pair with delayed y: comparison iteration"),
    ("h_degeneration_051", "H near 1/2: classical linear closed form e^{a(T-t)} eta"),
    ("isometry_battery", "divergence-integral mean and second-moment identities"),
];

#[derive(Debug, Clone)]
pub enum ScenarioKind<R: Real> {
    Picard(Box<DelayedBsdeProblem<R>>),
    Comparison { lower: Box<DelayedBsdeProblem<R>>, upper: Box<DelayedBsdeProblem<R>> },
    Battery { model: FbmModel<R>, n_tests: usize, threshold: f64 },
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec<R: Real> {
    pub name: String,
    pub seed: u64,
    pub n_paths: usize,
    pub solver: SolverConfig<R>,
    pub kind: ScenarioKind<R>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckOutcome { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyCheck {
    pub beta: f64,
    pub report: AprioriReport,
}

#[derive(Debug)]
pub struct ScenarioRun<R: Real> {
    pub name: String,
    pub seed: u64,
    pub fwd: Option<ForwardEnsemble<R>>,
    pub solution: Option<PicardSolution<R>>,
    pub comparison: Option<ComparisonOutcome<R>>,
    pub battery: Option<BatterySummary>,
    pub field: Option<ValueField<R>>,
    pub energy: Vec<EnergyCheck>,
    pub checks: Vec<CheckOutcome>,
    pub wall_seconds: f64,
}

impl<R: Real> ScenarioRun<R> {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const DESK_PATHS: usize = 10_000;

fn model<R: Real>(h: f64, horizon: f64, steps: usize, delay_steps: usize) -> Result<FbmModel<R>> {
    let hurst = HurstParam::new(R::of(h))?;
    let grid = TimeGrid::new(R::of(horizon), steps, delay_steps)?;
    Ok(FbmModel::new(hurst, grid))
}

fn plain_problem<R: Real>(
    model: FbmModel<R>,
    eta0: f64,
    terminal: TerminalMap<R>,
    gen: GeneratorSpec<R>,
    phi_level: f64,
    lipschitz: R,
) -> Result<DelayedBsdeProblem<R>> {
    Ok(DelayedBsdeProblem {
        model,
        eta0: R::of(eta0),
        drift: DeterministicFn::constant(R::zero()),
        vol: DeterministicFn::constant(R::one()),
        terminal,
        gen,
        phi0: DeterministicFn::constant(R::of(phi_level)),
        psi0: DeterministicFn::constant(R::zero()),
        constants: KernelConstants::new(R::of(2.5), R::one(), lipschitz)?,
    })
}

/// Builds one of the named library scenarios.
pub fn build_scenario<R: Real>(name: &str) -> Result<ScenarioSpec<R>> {
    let spec = match name {
        "zero_generator" => ScenarioSpec {
            name: name.into(),
            seed: 11,
            n_paths: DESK_PATHS,
            solver: SolverConfig::default(),
            kind: ScenarioKind::Picard(Box::new(plain_problem(
                model(0.75, 1.0, 128, 16)?,
                1.0,
                TerminalMap::identity(),
                GeneratorSpec::zero(),
                0.0,
                R::zero(),
            )?)),
        },
        "quadratic_terminal" => ScenarioSpec {
            name: name.into(),
            seed: 12,
            n_paths: DESK_PATHS,
            solver: SolverConfig::default(),
            kind: ScenarioKind::Picard(Box::new(plain_problem(
                model(0.75, 1.0, 128, 0)?,
                0.0,
                TerminalMap::square(),
                GeneratorSpec::zero(),
                0.0,
                R::zero(),
            )?)),
        },
        "linear_y" => ScenarioSpec {
            name: name.into(),
            seed: 13,
            n_paths: DESK_PATHS,
            solver: SolverConfig::default(),
            kind: ScenarioKind::Picard(Box::new(plain_problem(
                model(0.75, 1.0, 128, 0)?,
                1.0,
                TerminalMap::identity(),
                GeneratorSpec::linear_y(R::of(0.5)),
                0.0,
                R::of(0.25),
            )?)),
        },
        "delay_ge_T" => ScenarioSpec {
            name: name.into(),
            seed: 14,
            // double the desk default: the closed-form Z check needs the
            // accumulated slope noise under half its tolerance
            n_paths: 2 * DESK_PATHS,
            solver: SolverConfig::default(),
            kind: ScenarioKind::Picard(Box::new(plain_problem(
                model(0.75, 0.5, 128, 128)?,
                0.0,
                TerminalMap::identity(),
                GeneratorSpec::linear_delay(R::one()),
                1.0,
                R::one(),
            )?)),
        },
        "certified_contraction" => ScenarioSpec {
            name: name.into(),
            seed: 15,
            n_paths: DESK_PATHS,
            solver: SolverConfig {
                tol: Some(1e-14),
                max_iter: 60,
                ..SolverConfig::default()
            },
            kind: ScenarioKind::Picard(Box::new(plain_problem(
                // delta = 15/128 sits just under 1/(2.5 e + 1.6) = 0.11911
                model(0.75, 1.0, 128, 15)?,
                1.0,
                TerminalMap::identity(),
                GeneratorSpec::linear_delay(R::of(0.5)).with_lipschitz(R::of(0.5)),
                1.0,
                R::of(0.5),
            )?)),
        },
        "example43" => {
            let m = model(0.75, 0.25, 128, 3)?;
            let hurst = m.hurst;
            let horizon = m.grid.horizon();
            let gen_lower = GeneratorSpec::example43(hurst, horizon, R::of(-1.0));
            let l = gen_lower.lipschitz;
            let lower = plain_problem(m, 1.0, TerminalMap::identity(), gen_lower, 0.0, l)?;
            let upper = plain_problem(
                m,
                1.0,
                TerminalMap::identity(),
                GeneratorSpec::example43(hurst, horizon, R::one()),
                0.25,
                l,
            )?;
            ScenarioSpec {
                name: name.into(),
                seed: 16,
                n_paths: DESK_PATHS,
                solver: SolverConfig::default(),
                kind: ScenarioKind::Comparison {
                    lower: Box::new(lower),
                    upper: Box::new(upper),
                },
            }
        }
        "h_degeneration_051" => ScenarioSpec {
            name: name.into(),
            seed: 17,
            n_paths: DESK_PATHS,
            solver: SolverConfig::default(),
            kind: ScenarioKind::Picard(Box::new(plain_problem(
                model(0.51, 1.0, 128, 0)?,
                1.0,
                TerminalMap::identity(),
                GeneratorSpec::linear_y(R::of(0.25)),
                0.0,
                R::of(0.0625),
            )?)),
        },
        "isometry_battery" => ScenarioSpec {
            name: name.into(),
            seed: 18,
            n_paths: DESK_PATHS,
            solver: SolverConfig::default(),
            kind: ScenarioKind::Battery {
                model: model(0.75, 1.0, 128, 0)?,
                n_tests: 100,
                threshold: 3.0,
            },
        },
        other => {
            return Err(Error::invalid(format!(
                "unknown scenario '{other}'; known: {}",
                SCENARIO_LIST.map(|(n, _)| n).join(", ")
            )))
        }
    };
    Ok(spec)
}

/// Energy-inequality checks at the reference weights, evaluated on the
/// solved part of the ensemble with the generator realized along it.
pub fn energy_checks<R: Real>(
    problem: &DelayedBsdeProblem<R>,
    fwd: &ForwardEnsemble<R>,
    sol: &PicardSolution<R>,
) -> Result<Vec<EnergyCheck>> {
    let k = problem.model.grid.delay_steps();
    let (y, z) = sol.ensemble.solved_parts();
    let times = &sol.ensemble.times[k..];
    let gen_vals = realized_generator_values(problem, fwd, &sol.ensemble)?;
    let mut out = Vec::new();
    for beta in [1.0, 2.0] {
        let report = apriori_estimate_check(
            times,
            &y,
            &z,
            &gen_vals,
            R::of(beta),
            problem.constants.m,
            problem.model.hurst,
            0.05,
        )?;
        out.push(EnergyCheck { beta, report });
    }
    Ok(out)
}

/// Whether the generator ignores the solution entirely, so the parabolic
/// field solves the same problem and can cross-check the sweep.
pub fn field_comparable<R: Real>(gen: &GeneratorSpec<R>) -> bool {
    !gen.depends.any()
}

/// Solves the parabolic field for a solution-independent generator and
/// reports the per-path agreement with the sweep solution: the root mean
/// square Y difference over all nodes, and the pass scale `1 + max |Y|`.
pub fn field_cross_check<R: Real>(
    problem: &DelayedBsdeProblem<R>,
    fwd: &ForwardEnsemble<R>,
    sol: &PicardSolution<R>,
) -> Result<(ValueField<R>, f64, f64)> {
    let gen = problem.gen.clone();
    let source = move |t: R, x: R| {
        gen.eval(GenArgs {
            t,
            x,
            y: R::zero(),
            z: R::zero(),
            y_delay: R::zero(),
            z_delay: R::zero(),
        })
    };
    let field = solve_markovian_pde(
        &problem.model,
        problem.eta0,
        &problem.drift,
        &problem.vol,
        &problem.terminal,
        Some(&source),
        &PdeConfig::default(),
    )?;
    let on_paths = evaluate_on_paths(&field, fwd, &problem.vol)?;
    let n = problem.model.grid.steps();
    let n_paths = fwd.values.n_paths();
    let mut sum_sq = 0.0f64;
    let mut max_abs = 0.0f64;
    for i in 0..=n {
        for p in 0..n_paths {
            let a = sol.ensemble.y_at(p, i as isize).f64();
            let b = on_paths.y.at(p, i).f64();
            sum_sq += (a - b) * (a - b);
            max_abs = max_abs.max(b.abs());
        }
    }
    let rms = (sum_sq / ((n + 1) * n_paths) as f64).sqrt();
    Ok((field, rms, 1.0 + max_abs))
}

fn mean_and_mean_abs<R: Real>(col: &[R]) -> (f64, f64) {
    let mut m = 0.0;
    let mut a = 0.0;
    for &v in col {
        m += v.f64();
        a += v.f64().abs();
    }
    (m / col.len() as f64, a / col.len() as f64)
}

/// Runs a scenario and its oracle checks.
pub fn run_scenario<R: Real>(spec: &ScenarioSpec<R>) -> Result<ScenarioRun<R>>
where
    StandardNormal: Distribution<R>,
{
    let start = Instant::now();
    let mut run = ScenarioRun {
        name: spec.name.clone(),
        seed: spec.seed,
        fwd: None,
        solution: None,
        comparison: None,
        battery: None,
        field: None,
        energy: Vec::new(),
        checks: Vec::new(),
        wall_seconds: 0.0,
    };
    match &spec.kind {
        ScenarioKind::Picard(problem) => {
            let fwd = simulate_forward_quasi(
                problem.eta0,
                &problem.drift,
                &problem.vol,
                &problem.model,
                spec.n_paths,
                spec.seed,
            )?;
            let sol = solve_delayed_picard(problem, &fwd, &spec.solver)?;
            run.energy = energy_checks(problem, &fwd, &sol)?;
            for e in &run.energy {
                run.checks.push(CheckOutcome::new(
                    format!("energy_inequality_beta_{}", e.beta),
                    e.report.satisfied,
                    format!("lhs {:.6e} rhs {:.6e} margin {:.4}", e.report.lhs, e.report.rhs, e.report.margin),
                ));
            }
            if field_comparable(&problem.gen) {
                let (field, rms, scale) = field_cross_check(problem, &fwd, &sol)?;
                run.checks.push(CheckOutcome::new(
                    "field_agreement",
                    rms <= 1e-2 * scale,
                    format!("rms Y gap {rms:.4e} vs 1e-2 * {scale:.3}"),
                ));
                run.field = Some(field);
            }
            run.checks.push(CheckOutcome::new(
                "converged",
                sol.converged,
                format!(
                    "iterations {} last distance {:.3e}",
                    sol.trace.len(),
                    sol.trace.last_distance().unwrap_or(0.0)
                ),
            ));
            scenario_specific_checks(&spec.name, problem, &fwd, &sol, &mut run.checks);
            run.fwd = Some(fwd);
            run.solution = Some(sol);
        }
        ScenarioKind::Comparison { lower, upper } => {
            let fwd = simulate_forward_quasi(
                lower.eta0,
                &lower.drift,
                &lower.vol,
                &lower.model,
                spec.n_paths,
                spec.seed,
            )?;
            let out = solve_comparison_sequence(
                lower,
                upper,
                &fwd,
                &ComparisonConfig::default(),
                &spec.solver,
            )?;
            run.checks.push(CheckOutcome::new(
                "dominance",
                out.final_dominance.verdict && out.final_dominance.fraction == 1.0,
                format!(
                    "fraction {:.6} worst {:.3e} (tol {:.3e})",
                    out.final_dominance.fraction, out.final_dominance.worst_violation, out.tol_num
                ),
            ));
            run.checks.push(CheckOutcome::new(
                "monotone_sequence",
                out.monotone_ok,
                format!("first {} sweeps non-increasing", out.steps.len().min(5)),
            ));
            run.checks.push(CheckOutcome::new(
                "comparison_admissible",
                out.admissible,
                "delay within the comparison-mode bound",
            ));
            run.checks.push(CheckOutcome::new(
                "segment_ordering",
                out.psi_ordered,
                "Z segments ordered (recorded, unused)",
            ));
            run.checks.push(CheckOutcome::new(
                "limit_cross_check",
                out.cross_check_rel <= 0.05,
                format!("relative distance to direct solve {:.3e}", out.cross_check_rel),
            ));
            // energy checks on the dominating solve
            run.energy = energy_checks(upper, &fwd, &out.upper)?;
            for e in &run.energy {
                run.checks.push(CheckOutcome::new(
                    format!("energy_inequality_beta_{}", e.beta),
                    e.report.satisfied,
                    format!("lhs {:.6e} rhs {:.6e}", e.report.lhs, e.report.rhs),
                ));
            }
            run.fwd = Some(fwd);
            run.comparison = Some(out);
        }
        ScenarioKind::Battery { model, n_tests, threshold } => {
            let paths = sample_paths(model, spec.n_paths, spec.seed, SampleMethod::Cholesky)?;
            let summary = isometry_battery(&paths, *n_tests, spec.seed, *threshold)?;
            run.checks.push(CheckOutcome::new(
                "isometry_battery",
                summary.n_pass + 1 >= summary.n_tests,
                format!(
                    "{} of {} inside {} standard errors, max |z| {:.3}",
                    summary.n_pass, summary.n_tests, summary.threshold, summary.max_abs_z
                ),
            ));
            run.battery = Some(summary);
        }
    }
    run.wall_seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

fn scenario_specific_checks<R: Real>(
    name: &str,
    problem: &DelayedBsdeProblem<R>,
    fwd: &ForwardEnsemble<R>,
    sol: &PicardSolution<R>,
    checks: &mut Vec<CheckOutcome>,
) {
    let grid = problem.model.grid;
    let n = grid.steps();
    let horizon = grid.horizon().f64();
    let y0 = {
        let col = sol.ensemble.y.column(sol.ensemble.col(0));
        mean_and_mean_abs(&col).0
    };
    match name {
        "zero_generator" => {
            let target = problem.eta0.f64();
            checks.push(CheckOutcome::new(
                "y0_matches_initial_state",
                (y0 - target).abs() <= 0.035,
                format!("Y0 {y0:.5} vs {target:.5}"),
            ));
            checks.push(CheckOutcome::new(
                "one_pass",
                sol.trace.len() == 1,
                format!("{} iterations", sol.trace.len()),
            ));
        }
        "quadratic_terminal" => {
            let target = horizon.powf(problem.model.hurst.two_h().f64());
            checks.push(CheckOutcome::new(
                "y0_matches_t_pow_2h",
                (y0 - target).abs() <= 0.05,
                format!("Y0 {y0:.5} vs {target:.5}"),
            ));
        }
        "linear_y" => {
            let target = (0.5f64 * horizon).exp() * problem.eta0.f64();
            checks.push(CheckOutcome::new(
                "y0_matches_exponential",
                (y0 - target).abs() <= 0.02 * target,
                format!("Y0 {y0:.5} vs {target:.5}"),
            ));
        }
        "delay_ge_T" => {
            checks.push(CheckOutcome::new(
                "one_pass",
                sol.trace.len() == 1 && sol.converged,
                format!("{} iterations", sol.trace.len()),
            ));
            // Y is compared per node; its path mean is exact up to Monte
            // Carlo error of the terminal mean. Z is compared as the mean
            // over paths and nodes: per-node slope estimates inherit the
            // backward-accumulated regression noise (about 2.7/sqrt(paths)
            // per node), while their time average stays well inside the
            // tolerance at the scenario path count.
            let sigma = 1.0;
            let mut worst_y = 0.0f64;
            let mut ok = true;
            let mut z_acc = 0.0f64;
            let mut may_acc = 0.0f64;
            for i in 0..=n {
                let t = grid.node(i).f64();
                let ycol = sol.ensemble.y.column(sol.ensemble.col(i as isize));
                let zcol = sol.ensemble.z.column(sol.ensemble.col(i as isize));
                let (my, may) = mean_and_mean_abs(&ycol);
                let (mz, _) = mean_and_mean_abs(&zcol);
                let tol = 1e-2 * (1.0 + may);
                let ey = (my - (horizon - t)).abs();
                worst_y = worst_y.max(ey);
                ok &= ey <= tol;
                z_acc += mz;
                may_acc += may;
            }
            let z_bar = z_acc / (n + 1) as f64;
            let tol_z = 1e-2 * (1.0 + may_acc / (n + 1) as f64);
            let ez = (z_bar - sigma).abs();
            checks.push(CheckOutcome::new(
                "closed_form_mean",
                ok && ez <= tol_z,
                format!("worst Y mean gap {worst_y:.4e}, Z path mean gap {ez:.4e}"),
            ));
        }
        "certified_contraction" => {
            let ratios = sol.trace.ratios();
            checks.push(CheckOutcome::new(
                "certified",
                sol.certified && sol.admissible,
                format!("admissible {} certified {}", sol.admissible, sol.certified),
            ));
            let all_le = ratios.iter().all(|&r| r <= 0.55);
            checks.push(CheckOutcome::new(
                "ratios_below_half",
                all_le && ratios.len() >= 5,
                format!(
                    "{} ratios, max {:.4}",
                    ratios.len(),
                    ratios.iter().cloned().fold(0.0f64, f64::max)
                ),
            ));
            let decreasing = sol
                .trace
                .entries
                .windows(2)
                .all(|w| w[1].distance < w[0].distance);
            checks.push(CheckOutcome::new(
                "geometric_decay",
                decreasing,
                "successive distances strictly decrease",
            ));
        }
        "h_degeneration_051" => {
            let a = 0.25f64;
            let target0 = (a * horizon).exp() * problem.eta0.f64();
            checks.push(CheckOutcome::new(
                "classical_limit_t0",
                (y0 - target0).abs() <= 0.02 * target0.abs(),
                format!("Y0 {y0:.5} vs {target0:.5}"),
            ));
            let mid = n / 2;
            let t = grid.node(mid).f64();
            let cf = (a * (horizon - t)).exp();
            let ycol = sol.ensemble.y.column(sol.ensemble.col(mid as isize));
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for (p, yv) in ycol.iter().enumerate() {
                let ref_v = cf * fwd.values.at(p, mid).f64();
                num += (yv.f64() - ref_v) * (yv.f64() - ref_v);
                den += ref_v * ref_v;
            }
            let rel = (num / den).sqrt();
            checks.push(CheckOutcome::new(
                "classical_limit_mid",
                rel <= 0.02,
                format!("relative rms gap {rel:.4e} at t = {t:.3}"),
            ));
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_is_complete() {
        assert!(SCENARIO_LIST.len() >= 8);
        for (name, _) in SCENARIO_LIST {
            let spec: ScenarioSpec<f64> = build_scenario(name).unwrap();
            assert_eq!(spec.name, name);
        }
        assert!(build_scenario::<f64>("no_such").is_err());
    }

    #[test]
    fn small_zero_generator_run_passes() {
        let mut spec: ScenarioSpec<f64> = build_scenario("zero_generator").unwrap();
        // shrink for test speed; statistical tolerances stay honest because
        // the checks scale with the ensemble noise only through fixed bands
        spec.n_paths = 4000;
        if let ScenarioKind::Picard(p) = &mut spec.kind {
            let m = model(0.75, 1.0, 32, 4).unwrap();
            p.model = m;
        }
        let run = run_scenario(&spec).unwrap();
        assert!(run.solution.is_some());
        for c in &run.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
