//! Closed-form oracles for the singular-kernel quadrature. Every target
//! here is derived independently of the cell scheme: power-law identities,
//! the by-parts primitive for affine integrands, and the covariance form
//! for indicator supports.

use fracbsde::kernel::fbm_covariance;
use fracbsde::linalg::cholesky_lower;
use fracbsde::{
    inner_product, ratio_bound, sigma_hat, sigma_hat_lagged, sigma_norm_sq, DeterministicFn,
    FbmModel, HurstParam, TimeGrid,
};

fn model(h: f64, horizon: f64, steps: usize) -> FbmModel<f64> {
    FbmModel::new(HurstParam::new(h).unwrap(), TimeGrid::new(horizon, steps, 0).unwrap())
}

#[test]
fn unit_inner_product_is_t_to_2h_at_every_time() {
    for &h in &[0.55, 0.7, 0.75, 0.9] {
        let m = model(h, 1.0, 64);
        let one = DeterministicFn::constant(1.0);
        // nodes and off-node times alike: the final cell is cut at t
        for &t in &[1.0 / 64.0, 0.25, 0.3141, 0.5, 0.875, 1.0] {
            let got = inner_product(&m, &one, &one, t).unwrap();
            let expect = t.powf(2.0 * h);
            assert!(
                (got - expect).abs() < 1e-13 * (1.0 + expect),
                "H={h} t={t}: {got} vs {expect}"
            );
        }
    }
}

#[test]
fn indicator_inner_product_matches_increment_covariance() {
    // <1_[0,a], 1_[0,b]>_T = E[B_a B_b] = (a^{2H} + b^{2H} - |a-b|^{2H})/2
    let m = model(0.75, 1.0, 64);
    let cases = [(0.25, 0.75), (0.5, 0.5), (0.125, 1.0)];
    for &(a, b) in &cases {
        let fa = DeterministicFn::indicator(0.0, a);
        let fb = DeterministicFn::indicator(0.0, b);
        let got = inner_product(&m, &fa, &fb, 1.0).unwrap();
        let expect = m.covariance(a, b);
        assert!((got - expect).abs() < 1e-13, "a={a} b={b}: {got} vs {expect}");
    }
}

#[test]
fn affine_norm_converges_to_independent_double_integral() {
    // ||sigma||_t^2 for affine sigma, against a Riemann oracle built the
    // other way round: outer midpoint in u, inner exact in v through the
    // g1 primitive, on a grid unrelated to the library's cells
    let h = 0.75;
    let c0 = 0.8;
    let c1 = 0.5;
    let sigma = DeterministicFn::affine(c0, c1);
    let t = 0.7;
    let g1 = |x: f64| h * x.signum() * x.abs().powf(2.0 * h - 1.0);
    let n = 4000;
    let du = t / n as f64;
    let mut oracle = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) * du;
        let mut inner = 0.0;
        for j in 0..n {
            let v0 = j as f64 * du;
            let v1 = v0 + du;
            inner += (c0 + c1 * (v0 + v1) * 0.5) * (g1(u - v0) - g1(u - v1));
        }
        oracle += (c0 + c1 * u) * inner * du;
    }
    for steps in [512usize, 2048] {
        let m = model(h, 1.0, steps);
        let got = sigma_norm_sq(&m, &sigma, t).unwrap();
        let tol = if steps == 512 { 2e-5 } else { 4e-6 };
        assert!(
            ((got - oracle) / oracle).abs() < tol,
            "steps={steps}: {got} vs oracle {oracle}"
        );
    }
}

#[test]
fn occupation_weight_closed_forms() {
    // constant sigma: sigma H t^{2H-1} exactly; affine sigma: by parts,
    // H (c0 + c1 t) t^{2H-1} - c1 (2H-1)/2 * t^{2H} ... substituting
    // x = t - v gives H c0 t^{2H-1} + c1 [H t^{2H} ... ]; assembled below.
    let h = 0.7;
    let m = model(h, 1.0, 4096);
    let sig = DeterministicFn::constant(1.7);
    for &t in &[0.2, 0.5, 1.0] {
        let got = sigma_hat(&m, &sig, t);
        let expect = 1.7 * h * t.powf(2.0 * h - 1.0);
        assert!((got - expect).abs() < 1e-12, "t={t}: {got} vs {expect}");
    }
    let (c0, c1) = (0.4, 1.1);
    let aff = DeterministicFn::affine(c0, c1);
    for &t in &[0.3, 0.8] {
        let got = sigma_hat(&m, &aff, t);
        // int_0^t H(2H-1) x^{2H-2} (c0 + c1 (t - x)) dx
        //   = H (c0 + c1 t) t^{2H-1} - c1 (2H-1)/2 t^{2H}
        let expect =
            h * (c0 + c1 * t) * t.powf(2.0 * h - 1.0) - c1 * (2.0 * h - 1.0) / 2.0 * t.powf(2.0 * h);
        // midpoint sampling in the singular last cell converges like
        // dt^{2H}, a few 1e-6 relative at this resolution
        assert!(
            ((got - expect) / expect).abs() < 2e-5,
            "t={t}: {got} vs {expect}"
        );
    }
}

#[test]
fn lagged_weight_vanishes_up_to_the_delay_then_tracks_the_tail() {
    let h = 0.75;
    let m = model(h, 1.0, 512);
    let sig = DeterministicFn::constant(1.0);
    let delta = 0.2;
    assert_eq!(sigma_hat_lagged(&m, &sig, 0.1, delta), 0.0);
    assert_eq!(sigma_hat_lagged(&m, &sig, 0.2, delta), 0.0);
    for &t in &[0.25, 0.6, 1.0] {
        let got = sigma_hat_lagged(&m, &sig, t, delta);
        // int_0^{t-delta} phi(t-v) dv = H (t^{2H-1} - delta^{2H-1})
        let expect = h * (t.powf(2.0 * h - 1.0) - delta.powf(2.0 * h - 1.0));
        assert!((got - expect).abs() < 1e-12, "t={t}: {got} vs {expect}");
    }
}

#[test]
fn covariance_matrix_is_symmetric_positive_definite() {
    for &h in &[0.55, 0.75, 0.95] {
        let m = model(h, 2.0, 96);
        let cov = fbm_covariance(&m);
        for i in 0..96 {
            for j in 0..96 {
                assert_eq!(cov.at(i, j), cov.at(j, i));
            }
        }
        // Cholesky succeeding is the positive-definiteness certificate
        assert!(cholesky_lower(&cov).is_ok(), "H = {h}");
    }
}

#[test]
fn ratio_bound_floor_and_growth() {
    let m = model(0.75, 1.0, 128);
    let flat = ratio_bound(&m, &DeterministicFn::constant(3.0)).unwrap();
    assert_eq!(flat, 2.000001);
    let slow = ratio_bound(&m, &DeterministicFn::affine(1.0, 0.2)).unwrap();
    assert_eq!(slow, 2.000001);
    let spiky = DeterministicFn::from_fn("spike", |t: f64| if t < 0.7 { 4.0 } else { 0.02 });
    let b = ratio_bound(&m, &spiky).unwrap();
    assert!(b > 2.000001, "spiky volatility should exceed the floor, got {b}");
}
