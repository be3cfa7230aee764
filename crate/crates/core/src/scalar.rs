//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar the solvers are generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Bit pattern used for exact-match cache keys.
    fn key_bits(self) -> u64;
}

impl Real for f32 {
    fn key_bits(self) -> u64 {
        u64::from(self.to_bits())
    }
}

impl Real for f64 {
    fn key_bits(self) -> u64 {
        self.to_bits()
    }
}

/// Infinity norm of a vector.
pub fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Infinity norm of `a - b`.
pub fn diff_inf<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

/// Closed interval `[lo, hi]` used for sampling boxes and domains.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn unbounded() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        assert_eq!(norm_inf(&[1.0, -3.0, 2.0]), 3.0);
        assert_eq!(diff_inf(&[1.0f32, 2.0], &[1.5, -1.0]), 3.0);
        assert_eq!(norm_inf::<f64>(&[]), 0.0);
    }

    #[test]
    fn key_bits_distinguish_signed_zero() {
        assert_ne!(0.0f64.key_bits(), (-0.0f64).key_bits());
        assert_eq!(1.5f32.key_bits(), 1.5f32.key_bits());
    }

    #[test]
    fn interval_intersection() {
        let a = Interval::new(-2.0, 2.0);
        let b = Interval::new(0.5, 4.0);
        assert_eq!(a.intersect(&b), Interval::new(0.5, 2.0));
        assert!(Interval::<f64>::unbounded().contains(1e300));
        assert!(!Interval::<f64>::unbounded().is_valid());
    }
}
