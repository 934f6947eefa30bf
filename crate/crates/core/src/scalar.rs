//! Floating-point abstraction shared by the closed-form geometry and model code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used by the orbit, frame and LSP-model math: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance floor for iterative solvers at this precision.
    #[inline]
    fn solver_tolerance() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Wraps an angle to `[-π, π)`.
#[inline]
pub fn wrap_angle<T: Scalar>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = (x + T::PI()) % two_pi;
    if y < T::zero() {
        y = y + two_pi;
    }
    // `%` can round up to exactly 2π for tiny negative inputs.
    if y >= two_pi {
        y = y - two_pi;
    }
    y - T::PI()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.25) - (-PI + 0.25)).abs() < 1e-12);
        assert!((wrap_angle(-0.5f64) + 0.5).abs() < 1e-15);
        for k in -50..50 {
            let w = wrap_angle(k as f64 * 0.7311);
            assert!((-PI..PI).contains(&w));
        }
        assert!((-std::f32::consts::PI..std::f32::consts::PI).contains(&wrap_angle(-1e-9f32)));
    }
}
