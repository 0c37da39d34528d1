//! Scalar abstraction: all numeric code in this crate is generic over a
//! floating-point type implementing [`Real`]. Concrete aliases at the crate
//! root pin `f64`, which is what the CLI and the shipped configs use.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64` (exact for `f64`, rounded for `f32`).
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to any Real")
    }

    /// Back to `f64` for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_for_f64() {
        let x = 0.123456789012345678_f64;
        assert_eq!(f64::of(x), x);
        assert_eq!(x.to_f64_lossy(), x);
        assert_eq!(f64::of_usize(42), 42.0);
    }

    #[test]
    fn f32_lane_rounds() {
        let x = f32::of(1.0e-3);
        assert!((x - 1.0e-3f32).abs() < 1.0e-9);
    }
}
