//! Scalar abstraction for scores.
//!
//! Span comparison scores and precision/recall/F1 are ratios of small
//! integers, so every computation here can be carried out either in
//! floating point (`f32`, `f64`) or exactly in [`Rational64`]. The matcher
//! uses the exact type when it ranks candidates so that mathematically equal
//! scores always tie.

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Num + FromPrimitive + ToPrimitive + PartialOrd + Copy + Debug + Send + Sync + 'static
{
    /// `numerator / denominator`. The denominator must be non-zero.
    fn ratio(numerator: u64, denominator: u64) -> Self {
        debug_assert!(denominator != 0);
        let n = Self::from_u64(numerator).expect("numerator representable");
        let d = Self::from_u64(denominator).expect("denominator representable");
        n / d
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for Rational64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_is_exact_for_rationals() {
        let third = Rational64::ratio(4, 12);
        assert_eq!(third, Rational64::new(1, 3));
        assert_eq!(Rational64::ratio(3, 9), third);
    }

    #[test]
    fn ratio_in_floats() {
        assert_eq!(f64::ratio(1, 4), 0.25);
        assert_eq!(f32::ratio(3, 4), 0.75f32);
        assert_eq!(f64::ratio(4, 12), f64::ratio(3, 9));
    }

    #[test]
    fn min_of_picks_smaller() {
        assert_eq!(2.0f64.min_of(1.0), 1.0);
        assert_eq!(Rational64::new(5, 2).min_of(Rational64::from_integer(1)), Rational64::from_integer(1));
    }
}
