//! Scalar abstraction for the whole crate.
//!
//! Everything numerical is generic over [`Real`], a thin extension of
//! `num_traits::Float` with the conversions the solvers need. `f32` and
//! `f64` both satisfy it; `f64` is the type the scenario library and the
//! CLI use.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`. Panics only if the target type cannot
    /// represent any `f64` at all, which no `Float` of interest does.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable")
    }

    /// Exact for every index that fits the mantissa; grids stay far below that.
    fn from_index(n: usize) -> Self {
        Self::from_usize(n).expect("index not representable")
    }

    /// Widening (or identity) conversion used at reporting boundaries.
    fn f64(self) -> f64;

    /// `|x|^p`, safe at `x == 0` for `p > 0`.
    fn abs_powf(self, p: Self) -> Self {
        if self == Self::zero() {
            Self::zero()
        } else {
            self.abs().powf(p)
        }
    }
}

impl Real for f64 {
    fn f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    fn f64(self) -> f64 {
        self as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        let x = f64::of(0.75);
        assert_eq!(x, 0.75);
        let y = f32::of(0.75);
        assert_eq!(y, 0.75f32);
        assert_eq!(f64::from_index(128), 128.0);
        assert_eq!(0.75f64.f64(), 0.75);
    }

    #[test]
    fn abs_powf_handles_zero_and_sign() {
        assert_eq!(0.0f64.abs_powf(0.5), 0.0);
        let v = (-2.0f64).abs_powf(1.5);
        assert!((v - 2.0f64.powf(1.5)).abs() < 1e-15, "got {v}");
    }
}
