use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used by metrics, statistics and pattern scores.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Lossless for counts up to 2^24 (`f32`) or 2^53 (`f64`).
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `num / den`, or `fallback` when `den == 0`.
    fn ratio_or(num: u64, den: u64, fallback: Self) -> Self {
        if den == 0 {
            fallback
        } else {
            Self::from_count(num) / Self::from_count(den)
        }
    }

    fn half() -> Self {
        Self::from_f64_lossy(0.5)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_fallback_on_zero_denominator() {
        assert_eq!(f64::ratio_or(0, 0, 1.0), 1.0);
        assert_eq!(f32::ratio_or(2, 4, 1.0), 0.5);
    }
}
