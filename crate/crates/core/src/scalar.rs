//! Floating scalar abstraction for photon counts and probabilities.

use core::fmt::{Debug, Display};
use core::ops::AddAssign;
use num_traits::{Float, FromPrimitive};
use serde::Serialize;

/// Scalar type for all light-level and probability arithmetic.
///
/// `f64` is the working precision of the simulator (aliased as
/// [`crate::Real`]); `f32` satisfies the same bounds and is exercised in
/// tests of the closed-form expressions.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + Debug + Display + Default + Serialize + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics on unrepresentable input, which
    /// cannot happen for the finite constants used in this crate.
    #[inline]
    fn real(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn half() -> Self {
        Self::real(0.5)
    }

    /// Widens to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_roundtrip_both_precisions() {
        assert_eq!(<f64 as Scalar>::real(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::real(0.25), 0.25f32);
        assert_eq!(0.5f64.as_f64(), 0.5);
        assert_eq!(f32::half(), 0.5f32);
    }
}
