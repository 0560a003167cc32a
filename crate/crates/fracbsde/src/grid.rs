//! Hurst parameter, uniform time grid and the model container tying them
//! together.

use crate::error::{Error, Result};
use crate::numeric::Real;

/// Hurst index restricted to the long-memory regime `1/2 < H < 1`.
///
/// The open lower end matters: every kernel formula below divides by
/// `2H - 1` or integrates `|t|^{2H-2}`, both of which degenerate at 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstParam<R: Real>(R);

impl<R: Real> HurstParam<R> {
    pub fn new(h: R) -> Result<Self> {
        let half = R::of(0.5);
        if !(h > half && h < R::one()) || !h.is_finite() {
            return Err(Error::invalid(format!(
                "Hurst index must lie strictly between 0.5 and 1, got {h}"
            )));
        }
        Ok(HurstParam(h))
    }

    pub fn value(self) -> R {
        self.0
    }

    /// `2H`, the variance exponent.
    pub fn two_h(self) -> R {
        self.0 + self.0
    }

    /// `2H - 1`, the weight exponent; positive on the admissible range.
    pub fn two_h_minus_one(self) -> R {
        self.two_h() - R::one()
    }

    /// `H (2H - 1)`, the kernel constant in `phi(x) = H(2H-1)|x|^{2H-2}`.
    pub fn kernel_coeff(self) -> R {
        self.0 * self.two_h_minus_one()
    }
}

/// Uniform grid on `[0, T]` with `steps` cells, plus the delay expressed in
/// whole cells so that `t - delta` always lands on a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<R: Real> {
    horizon: R,
    steps: usize,
    delay_steps: usize,
}

impl<R: Real> TimeGrid<R> {
    pub fn new(horizon: R, steps: usize, delay_steps: usize) -> Result<Self> {
        if !(horizon > R::zero()) || !horizon.is_finite() {
            return Err(Error::invalid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        if delay_steps > steps {
            return Err(Error::invalid(format!(
                "delay of {delay_steps} cells exceeds the {steps}-cell horizon"
            )));
        }
        Ok(TimeGrid { horizon, steps, delay_steps })
    }

    pub fn horizon(&self) -> R {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn dt(&self) -> R {
        self.horizon / R::from_index(self.steps)
    }

    /// Node `t_i = T i / n`; exact at both endpoints.
    pub fn node(&self, i: usize) -> R {
        debug_assert!(i <= self.steps);
        if i == self.steps {
            self.horizon
        } else {
            self.horizon * R::from_index(i) / R::from_index(self.steps)
        }
    }

    /// Node at a signed index, covering the delay segment `[-delta, 0)`.
    pub fn node_signed(&self, i: isize) -> R {
        if i >= 0 {
            self.node(i as usize)
        } else {
            -(self.horizon * R::from_index(i.unsigned_abs()) / R::from_index(self.steps))
        }
    }

    pub fn delay(&self) -> R {
        self.dt() * R::from_index(self.delay_steps)
    }

    /// All nodes `t_0..t_n`.
    pub fn nodes(&self) -> Vec<R> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }

    /// Nodes from `-delta` to `T`; the first `delay_steps` entries are
    /// negative.
    pub fn nodes_with_segment(&self) -> Vec<R> {
        (-(self.delay_steps as isize)..=self.steps as isize)
            .map(|i| self.node_signed(i))
            .collect()
    }
}

/// Fractional Brownian model: Hurst index plus grid. Owns no randomness.
#[derive(Debug, Clone, Copy)]
pub struct FbmModel<R: Real> {
    pub hurst: HurstParam<R>,
    pub grid: TimeGrid<R>,
}

impl<R: Real> FbmModel<R> {
    pub fn new(hurst: HurstParam<R>, grid: TimeGrid<R>) -> Self {
        FbmModel { hurst, grid }
    }

    /// Covariance of increments over `[0,s]` and `[0,t]`:
    /// `(s^{2H} + t^{2H} - |t-s|^{2H}) / 2`.
    pub fn covariance(&self, s: R, t: R) -> R {
        let two_h = self.hurst.two_h();
        let half = R::of(0.5);
        half * (s.abs_powf(two_h) + t.abs_powf(two_h) - (t - s).abs_powf(two_h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurst_rejects_boundary_and_outside() {
        assert!(HurstParam::new(0.5f64).is_err());
        assert!(HurstParam::new(1.0f64).is_err());
        assert!(HurstParam::new(0.49f64).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        let h = HurstParam::new(0.75f64).unwrap();
        assert_eq!(h.two_h(), 1.5);
        assert_eq!(h.two_h_minus_one(), 0.5);
        assert!((h.kernel_coeff() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn grid_nodes_are_exact_at_ends() {
        let g = TimeGrid::new(1.0f64, 128, 16).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(128), 1.0);
        assert_eq!(g.dt(), 1.0 / 128.0);
        assert_eq!(g.delay(), 0.125);
        assert_eq!(g.node_signed(-16), -0.125);
        let nodes = g.nodes_with_segment();
        assert_eq!(nodes.len(), 145);
        assert_eq!(nodes[0], -0.125);
        assert_eq!(nodes[16], 0.0);
        assert_eq!(*nodes.last().unwrap(), 1.0);
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(TimeGrid::new(0.0f64, 10, 0).is_err());
        assert!(TimeGrid::new(1.0f64, 0, 0).is_err());
        assert!(TimeGrid::new(1.0f64, 10, 11).is_err());
        assert!(TimeGrid::new(1.0f64, 10, 10).is_ok());
    }

    #[test]
    fn covariance_matches_closed_form() {
        let model = FbmModel::new(
            HurstParam::new(0.75f64).unwrap(),
            TimeGrid::new(1.0f64, 2, 0).unwrap(),
        );
        // var(B_t) = t^{2H}
        assert!((model.covariance(0.5, 0.5) - 0.5f64.powf(1.5)).abs() < 1e-15);
        // cov(B_{0.5}, B_1) = (0.5^{1.5} + 1 - 0.5^{1.5}) / 2 = 0.5
        assert!((model.covariance(0.5, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(model.covariance(0.0, 1.0), 0.0);
    }
}
