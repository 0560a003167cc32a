//! Gauss-Hermite quadrature (weight `exp(-z^2)`), built by Newton iteration
//! on the orthonormal recurrence. Used for closed-form conditional
//! expectations of terminal maps under Gaussian laws.

use crate::error::{Error, Result};
use crate::numeric::Real;

#[derive(Debug, Clone)]
pub struct GaussHermite<R: Real> {
    pub nodes: Vec<R>,
    pub weights: Vec<R>,
}

impl<R: Real> GaussHermite<R> {
    /// Nodes and weights of the `n`-point rule, largest root first found
    /// from asymptotic guesses, the rest chained; roots come out sorted
    /// descending in magnitude per symmetric half.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("Gauss-Hermite rule needs at least two nodes"));
        }
        let mut nodes = vec![R::zero(); n];
        let mut weights = vec![R::zero(); n];
        let m = (n + 1) / 2;
        let nf = R::from_index(n);
        let mut z = R::zero();
        for i in 0..m {
            z = match i {
                0 => {
                    let c = R::of(2.0) * nf + R::one();
                    c.sqrt() - R::of(1.85575) * c.powf(R::of(-1.0 / 6.0))
                }
                1 => z - R::of(1.14) * nf.powf(R::of(0.426)) / z,
                2 => R::of(1.86) * z - R::of(0.86) * nodes[0],
                3 => R::of(1.91) * z - R::of(0.91) * nodes[1],
                _ => R::of(2.0) * z - nodes[i - 2],
            };
            let mut converged = false;
            let mut pp = R::zero();
            for _ in 0..100 {
                // orthonormal Hermite recurrence up to degree n at z
                let mut p1 = R::PI().powf(R::of(-0.25));
                let mut p2 = R::zero();
                for j in 1..=n {
                    let jf = R::from_index(j);
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (R::of(2.0) / jf).sqrt() * p2 - ((jf - R::one()) / jf).sqrt() * p3;
                }
                pp = (R::of(2.0) * nf).sqrt() * p2;
                let dz = p1 / pp;
                z = z - dz;
                if dz.abs() <= R::of(1e-15) * (R::one() + z.abs()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::numerical(format!(
                    "Hermite root {i} of {n} did not converge"
                )));
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            let w = R::of(2.0) / (pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(GaussHermite { nodes, weights })
    }

    /// `E[f(mean + sd Z)]` for standard normal `Z`, `sd >= 0`.
    pub fn expect_normal(&self, mean: R, sd: R, f: impl Fn(R) -> R) -> R {
        let scale = sd * R::of(2.0).sqrt();
        let mut acc = R::zero();
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mean + scale * z);
        }
        acc / R::PI().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [2usize, 8, 31, 64] {
            let q = GaussHermite::<f64>::new(n).unwrap();
            let s: f64 = q.weights.iter().sum();
            assert!(
                (s - std::f64::consts::PI.sqrt()).abs() < 1e-12,
                "n={n}: weight sum {s}"
            );
        }
    }

    #[test]
    fn normal_moments_are_exact() {
        let q = GaussHermite::<f64>::new(64).unwrap();
        // E[Z^2] = 1, E[Z^4] = 3, E[Z^8] = 105
        let m2 = q.expect_normal(0.0, 1.0, |x| x * x);
        let m4 = q.expect_normal(0.0, 1.0, |x| x.powi(4));
        let m8 = q.expect_normal(0.0, 1.0, |x| x.powi(8));
        assert!((m2 - 1.0).abs() < 1e-13, "m2 {m2}");
        assert!((m4 - 3.0).abs() < 1e-12, "m4 {m4}");
        assert!((m8 - 105.0).abs() < 1e-10, "m8 {m8}");
        let odd = q.expect_normal(0.0, 1.0, |x| x.powi(3));
        assert!(odd.abs() < 1e-13, "odd moment {odd}");
    }

    #[test]
    fn lognormal_mean_with_shift_and_scale() {
        let q = GaussHermite::<f64>::new(64).unwrap();
        // E[exp(mu + s Z)] = exp(mu + s^2/2)
        let got = q.expect_normal(0.3, 0.7, |x| x.exp());
        let expect = (0.3f64 + 0.7 * 0.7 / 2.0).exp();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn degenerate_rule_rejected() {
        assert!(GaussHermite::<f64>::new(1).is_err());
    }
}
