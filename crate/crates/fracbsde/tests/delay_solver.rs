//! End-to-end behavior of the delayed Picard solver: the one-sweep regime
//! when the delay swallows the horizon, certified geometric contraction
//! under the admissibility bound, and honest failure on a divergent map.

use fracbsde::sampler::simulate_forward_quasi;
use fracbsde::{
    admissible_delay, realized_generator_values, solve_delayed_picard, AdmissibleMode,
    DelayedBsdeProblem, DeterministicFn, Error, FbmModel, GeneratorSpec, HurstParam,
    KernelConstants, SolverConfig, TerminalMap, TimeGrid,
};

fn model(h: f64, horizon: f64, steps: usize, delay_steps: usize) -> FbmModel<f64> {
    FbmModel::new(
        HurstParam::new(h).unwrap(),
        TimeGrid::new(horizon, steps, delay_steps).unwrap(),
    )
}

fn problem(
    m: FbmModel<f64>,
    eta0: f64,
    terminal: TerminalMap<f64>,
    gen: GeneratorSpec<f64>,
    phi_level: f64,
) -> DelayedBsdeProblem<f64> {
    let lipschitz = gen.lipschitz;
    DelayedBsdeProblem {
        model: m,
        eta0,
        drift: DeterministicFn::constant(0.0),
        vol: DeterministicFn::constant(1.0),
        terminal,
        gen,
        phi0: DeterministicFn::constant(phi_level),
        psi0: DeterministicFn::constant(0.0),
        constants: KernelConstants::new(2.5, 1.0, lipschitz).unwrap(),
    }
}

#[test]
fn delay_spanning_the_horizon_solves_in_one_sweep() {
    // f = y_delay always reads the frozen segment phi = 1, so the equation
    // is linear with closed form Y_t = eta_t + (T - t), Z = sigma = 1
    let m = model(0.75, 0.5, 64, 64);
    let p = problem(m, 0.0, TerminalMap::identity(), GeneratorSpec::linear_delay(1.0), 1.0);
    let fwd = simulate_forward_quasi(0.0, &p.drift, &p.vol, &m, 8000, 21).unwrap();
    let sol = solve_delayed_picard(&p, &fwd, &SolverConfig::default()).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.trace.entries.len(), 1, "delay >= horizon must not iterate");

    // Y tracks the closed form pathwise node by node; Z carries
    // backward-accumulated regression noise per node, so it is compared
    // as the mean over paths and nodes
    let (y, z) = sol.ensemble.solved_parts();
    let n = m.grid.steps();
    let np = y.n_paths() as f64;
    let mut z_acc = 0.0f64;
    let mut scale_acc = 0.0f64;
    for i in 0..=n {
        let t = m.grid.node(i);
        let mut y_gap = 0.0f64;
        let mut y_scale = 0.0f64;
        let mut z_mean = 0.0f64;
        for pth in 0..y.n_paths() {
            let expect = fwd.values.at(pth, i) + (0.5 - t);
            y_gap += (y.at(pth, i) - expect).abs();
            y_scale += y.at(pth, i).abs();
            z_mean += z.at(pth, i);
        }
        y_gap /= np;
        y_scale /= np;
        z_mean /= np;
        assert!(y_gap < 1e-2 * (1.0 + y_scale), "node {i}: mean |Y - closed form| = {y_gap}");
        z_acc += z_mean;
        scale_acc += y_scale;
    }
    let z_bar = z_acc / (n + 1) as f64;
    let tol_z = 1e-2 * (1.0 + scale_acc / (n + 1) as f64);
    assert!((z_bar - 1.0).abs() < tol_z, "path mean Z = {z_bar}");
    // Y_0 = eta_0 + T = 0.5
    let y0 = y.column_mean(0);
    assert!((y0 - 0.5).abs() < 5e-3, "Y0 = {y0}");
}

#[test]
fn admissible_delay_certifies_geometric_contraction() {
    let (beta, delta_max) = admissible_delay(0.5f64, 2.5, AdmissibleMode::Existence).unwrap();
    let m = model(0.75, 1.0, 32, 3);
    assert!(m.grid.delay() <= delta_max, "test grid must sit under the bound");
    let p = problem(
        m,
        1.0,
        TerminalMap::identity(),
        GeneratorSpec::linear_delay(0.5).with_lipschitz(0.5),
        1.0,
    );
    let fwd = simulate_forward_quasi(1.0, &p.drift, &p.vol, &m, 4000, 33).unwrap();
    let cfg = SolverConfig { tol: Some(1e-14), max_iter: 60, ..SolverConfig::default() };
    let sol = solve_delayed_picard(&p, &fwd, &cfg).unwrap();
    assert!(sol.converged);
    assert!(sol.admissible);
    assert!(sol.certified);
    assert!((sol.norm_beta - beta).abs() < 1e-12, "weight should be the derived beta");
    let ratios = sol.trace.ratios();
    assert!(ratios.len() >= 5, "want several contraction ratios, got {}", ratios.len());
    for (i, r) in ratios.iter().enumerate() {
        assert!(*r <= 0.55, "ratio {i} = {r}");
    }
    let ds: Vec<f64> = sol.trace.entries.iter().map(|e| e.distance).collect();
    for w in ds.windows(2) {
        assert!(w[1] < w[0], "distances must decrease strictly: {ds:?}");
    }
}

#[test]
fn violently_scaled_delay_map_reports_divergence() {
    let m = model(0.75, 1.0, 16, 8);
    let p = problem(m, 0.0, TerminalMap::identity(), GeneratorSpec::linear_delay(8.0), 0.5);
    let fwd = simulate_forward_quasi(0.0, &p.drift, &p.vol, &m, 1000, 5).unwrap();
    let cfg = SolverConfig { tol: Some(1e-16), max_iter: 5, ..SolverConfig::default() };
    match solve_delayed_picard(&p, &fwd, &cfg) {
        Err(Error::Diverged { iterations, last }) => {
            assert_eq!(iterations, 5);
            assert!(last > 0.0);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn generator_without_delay_dependence_skips_iteration() {
    // f = a y needs no delayed reads, so one sweep is exact for the scheme
    let m = model(0.75, 1.0, 64, 0);
    let p = problem(m, 1.0, TerminalMap::identity(), GeneratorSpec::linear_y(0.5), 0.0);
    let fwd = simulate_forward_quasi(1.0, &p.drift, &p.vol, &m, 6000, 55).unwrap();
    let sol = solve_delayed_picard(&p, &fwd, &SolverConfig::default()).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.trace.entries.len(), 1);
    let (y, _) = sol.ensemble.solved_parts();
    let y0 = y.column_mean(0);
    let target = 0.5f64.exp();
    assert!(
        (y0 - target).abs() < 2e-2 * target,
        "Y0 = {y0} vs e^0.5 = {target}"
    );
}

#[test]
fn realized_generator_surface_has_solution_shape() {
    let m = model(0.75, 0.5, 16, 4);
    let p = problem(m, 0.0, TerminalMap::identity(), GeneratorSpec::constant(0.7), 0.0);
    let fwd = simulate_forward_quasi(0.0, &p.drift, &p.vol, &m, 200, 3).unwrap();
    let sol = solve_delayed_picard(&p, &fwd, &SolverConfig::default()).unwrap();
    let g = realized_generator_values(&p, &fwd, &sol.ensemble).unwrap();
    assert_eq!(g.n_paths(), 200);
    assert_eq!(g.n_cols(), 17);
    for pth in 0..200 {
        for i in 0..17 {
            assert_eq!(g.at(pth, i), 0.7);
        }
    }
}

#[test]
fn mismatched_ensembles_and_shapes_are_rejected() {
    let m = model(0.75, 1.0, 16, 4);
    let p = problem(m, 0.0, TerminalMap::identity(), GeneratorSpec::zero(), 0.0);
    let other = model(0.75, 1.0, 32, 4);
    let fwd = simulate_forward_quasi(0.0, &p.drift, &p.vol, &other, 100, 1).unwrap();
    assert!(solve_delayed_picard(&p, &fwd, &SolverConfig::default()).is_err());

    // delayed dependence with no delay cells is a contradiction
    let flat = model(0.75, 1.0, 16, 0);
    let bad = problem(flat, 0.0, TerminalMap::identity(), GeneratorSpec::linear_delay(0.5), 0.0);
    assert!(bad.validate().is_err());
}
