//! Deterministic time coefficients and terminal maps.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numeric::Real;

/// Deterministic function of time, `t -> R`. Cheap to clone.
#[derive(Clone)]
pub struct DeterministicFn<R: Real> {
    f: Arc<dyn Fn(R) -> R + Send + Sync>,
    label: String,
}

impl<R: Real> fmt::Debug for DeterministicFn<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeterministicFn({})", self.label)
    }
}

impl<R: Real> DeterministicFn<R> {
    pub fn from_fn(label: impl Into<String>, f: impl Fn(R) -> R + Send + Sync + 'static) -> Self {
        DeterministicFn { f: Arc::new(f), label: label.into() }
    }

    pub fn constant(c: R) -> Self {
        Self::from_fn(format!("const {c}"), move |_| c)
    }

    /// `t -> a + c t`.
    pub fn affine(a: R, c: R) -> Self {
        Self::from_fn(format!("affine {a} + {c} t"), move |t| a + c * t)
    }

    /// Indicator of `[a, b)`.
    pub fn indicator(a: R, b: R) -> Self {
        Self::from_fn(format!("indicator [{a}, {b})"), move |t| {
            if t >= a && t < b {
                R::one()
            } else {
                R::zero()
            }
        })
    }

    /// Piecewise constant on the cells of `grid`: value `levels[j]` on
    /// `[t_j, t_{j+1})`, clamped at the ends.
    pub fn piecewise(grid: TimeGrid<R>, levels: Vec<R>) -> Result<Self> {
        if levels.len() != grid.steps() {
            return Err(Error::invalid(format!(
                "piecewise coefficient needs {} levels, got {}",
                grid.steps(),
                levels.len()
            )));
        }
        Ok(Self::from_fn("piecewise", move |t| {
            let dt = grid.dt();
            let idx = (t / dt).floor().f64() as isize;
            let idx = idx.clamp(0, grid.steps() as isize - 1) as usize;
            levels[idx]
        }))
    }

    pub fn eval(&self, t: R) -> R {
        (self.f)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Values at the grid nodes `t_0..t_n`.
    pub fn node_values(&self, grid: &TimeGrid<R>) -> Vec<R> {
        (0..=grid.steps()).map(|i| self.eval(grid.node(i))).collect()
    }

    /// Values at the cell midpoints `(t_j + t_{j+1}) / 2`.
    pub fn cell_values(&self, grid: &TimeGrid<R>) -> Vec<R> {
        let half = R::of(0.5);
        (0..grid.steps())
            .map(|j| self.eval(half * (grid.node(j) + grid.node(j + 1))))
            .collect()
    }

    /// A volatility must be finite, non-vanishing and of one sign at every
    /// node and cell midpoint; the quadrature ratios divide by it.
    pub fn validate_volatility(&self, grid: &TimeGrid<R>) -> Result<()> {
        let mut sign = R::zero();
        let probes = self
            .node_values(grid)
            .into_iter()
            .chain(self.cell_values(grid));
        for v in probes {
            if !v.is_finite() || v == R::zero() {
                return Err(Error::coefficient(format!(
                    "volatility '{}' vanishes or is non-finite on the grid",
                    self.label
                )));
            }
            let s = v.signum();
            if sign == R::zero() {
                sign = s;
            } else if s != sign {
                return Err(Error::coefficient(format!(
                    "volatility '{}' changes sign on the grid",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// Terminal condition `h` with an optional analytic derivative. When absent
/// the derivative falls back to a symmetric difference with a relative step.
#[derive(Clone)]
pub struct TerminalMap<R: Real> {
    h: Arc<dyn Fn(R) -> R + Send + Sync>,
    dh: Option<Arc<dyn Fn(R) -> R + Send + Sync>>,
    label: String,
}

impl<R: Real> fmt::Debug for TerminalMap<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TerminalMap({})", self.label)
    }
}

impl<R: Real> TerminalMap<R> {
    pub fn from_fn(label: impl Into<String>, h: impl Fn(R) -> R + Send + Sync + 'static) -> Self {
        TerminalMap { h: Arc::new(h), dh: None, label: label.into() }
    }

    pub fn with_derivative(
        label: impl Into<String>,
        h: impl Fn(R) -> R + Send + Sync + 'static,
        dh: impl Fn(R) -> R + Send + Sync + 'static,
    ) -> Self {
        TerminalMap { h: Arc::new(h), dh: Some(Arc::new(dh)), label: label.into() }
    }

    pub fn identity() -> Self {
        Self::with_derivative("id", |x| x, |_| R::one())
    }

    pub fn square() -> Self {
        Self::with_derivative("square", |x| x * x, |x| x + x)
    }

    pub fn quartic() -> Self {
        Self::with_derivative("quartic", |x| x * x * x * x, |x| R::of(4.0) * x * x * x)
    }

    /// Call payoff `(x - k)^+`.
    pub fn call(k: R) -> Self {
        Self::with_derivative(
            format!("call strike {k}"),
            move |x| (x - k).max(R::zero()),
            move |x| if x > k { R::one() } else { R::zero() },
        )
    }

    pub fn eval(&self, x: R) -> R {
        (self.h)(x)
    }

    pub fn derivative(&self, x: R) -> R {
        match &self.dh {
            Some(dh) => dh(x),
            None => {
                let eps = R::of(1e-6) * (R::one() + x.abs());
                ((self.h)(x + eps) - (self.h)(x - eps)) / (eps + eps)
            }
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    #[test]
    fn presets_evaluate() {
        let c = DeterministicFn::constant(2.0f64);
        assert_eq!(c.eval(0.3), 2.0);
        let a = DeterministicFn::affine(1.0f64, -0.5);
        assert_eq!(a.eval(2.0), 0.0);
        let ind = DeterministicFn::indicator(0.25f64, 0.5);
        assert_eq!(ind.eval(0.25), 1.0);
        assert_eq!(ind.eval(0.5), 0.0);
    }

    #[test]
    fn piecewise_respects_cells() {
        let grid = TimeGrid::new(1.0f64, 4, 0).unwrap();
        let f = DeterministicFn::piecewise(grid, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.eval(0.1), 1.0);
        assert_eq!(f.eval(0.26), 2.0);
        assert_eq!(f.eval(0.99), 4.0);
        assert_eq!(f.eval(1.0), 4.0);
        assert!(DeterministicFn::piecewise(grid, vec![1.0]).is_err());
    }

    #[test]
    fn volatility_validation_catches_zero_and_sign_flip() {
        let grid = TimeGrid::new(1.0f64, 8, 0).unwrap();
        assert!(DeterministicFn::constant(1.0f64).validate_volatility(&grid).is_ok());
        assert!(DeterministicFn::constant(-0.5f64).validate_volatility(&grid).is_ok());
        assert!(DeterministicFn::constant(0.0f64).validate_volatility(&grid).is_err());
        assert!(DeterministicFn::affine(-0.5f64, 1.0).validate_volatility(&grid).is_err());
    }

    #[test]
    fn terminal_derivatives_exact_and_numeric() {
        let sq = TerminalMap::square();
        assert_eq!(sq.eval(3.0f64), 9.0);
        assert_eq!(sq.derivative(3.0), 6.0);
        let custom = TerminalMap::from_fn("cube", |x: f64| x * x * x);
        let d = custom.derivative(2.0);
        assert!((d - 12.0).abs() < 1e-4, "numeric derivative {d}");
        let call = TerminalMap::call(1.0f64);
        assert_eq!(call.eval(0.5), 0.0);
        assert_eq!(call.eval(1.5), 0.5);
        assert_eq!(call.derivative(1.5), 1.0);
    }
}
