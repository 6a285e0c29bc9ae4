//! Number types the symbolic layer can run on: `f64` with tolerance-aware
//! comparisons, or exact `BigRational`.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Two exponents closer than this are the same exponent.
pub const EXPONENT_TOL: f64 = 1e-9;
/// Relative threshold below which float coefficients are dropped.
pub const PRUNE_TOL: f64 = 1e-14;
/// Largest denominator accepted when reading a float as a rational.
pub const MAX_DENOMINATOR: i64 = 1_000_000;

pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Whether arithmetic is exact.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Converts a float. Exact scalars accept only floats that are
    /// (to a few ulps) rationals with denominator at most [`MAX_DENOMINATOR`].
    fn from_f64(x: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn abs(&self) -> Self;
    /// Exponent equality: exact, or within [`EXPONENT_TOL`].
    fn approx_eq(&self, other: &Self) -> bool;
    /// Coefficient pruning test relative to the largest magnitude present.
    fn negligible(&self, scale: f64) -> bool;
    /// The value as an integer, if it is one.
    fn as_integer(&self) -> Option<i64>;
    /// Numerator and denominator, for exact serialization.
    fn ratio_parts(&self) -> Option<(BigInt, BigInt)>;
    /// `num/den`; `None` for a zero denominator or an unrepresentable value.
    fn from_big_ratio(num: BigInt, den: BigInt) -> Option<Self>;

    fn is_positive(&self) -> bool {
        self.to_f64() > 0.0 && !self.is_zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn approx_eq(&self, other: &Self) -> bool {
        f64::abs(self - other) < EXPONENT_TOL
    }
    fn negligible(&self, scale: f64) -> bool {
        f64::abs(*self) < PRUNE_TOL * (1.0 + scale)
    }
    fn as_integer(&self) -> Option<i64> {
        let r = self.round();
        (f64::abs(self - r) < EXPONENT_TOL && r.abs() < 9.0e15).then_some(r as i64)
    }
    fn ratio_parts(&self) -> Option<(BigInt, BigInt)> {
        None
    }
    fn from_big_ratio(num: BigInt, den: BigInt) -> Option<Self> {
        if Zero::is_zero(&den) {
            return None;
        }
        ToPrimitive::to_f64(&BigRational::new(num, den)).filter(|x| x.is_finite())
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_f64(x: f64) -> Option<Self> {
        rationalize(x, MAX_DENOMINATOR).map(|(n, d)| Self::from_ratio(n, d))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }
    fn negligible(&self, _scale: f64) -> bool {
        Zero::is_zero(self)
    }
    fn as_integer(&self) -> Option<i64> {
        if self.is_integer() {
            self.to_integer().to_i64()
        } else {
            None
        }
    }
    fn ratio_parts(&self) -> Option<(BigInt, BigInt)> {
        Some((self.numer().clone(), self.denom().clone()))
    }
    fn from_big_ratio(num: BigInt, den: BigInt) -> Option<Self> {
        (!Zero::is_zero(&den)).then(|| BigRational::new(num, den))
    }
}

/// Best continued-fraction approximation `num/den` of `x` with
/// `den <= max_den`, accepted only if it reproduces `x` to a few ulps.
pub fn rationalize(x: f64, max_den: i64) -> Option<(i64, i64)> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let tol = 4.0 * f64::EPSILON * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol {
            return Some((h1 as i64, k1 as i64));
        }
        let frac = rest - a;
        if frac.abs() < 1e-300 {
            break;
        }
        rest = 1.0 / frac;
    }
    None
}

/// Reads a sequence of floats as rationals, or `None` if any is not one.
pub fn rationalize_all(xs: &[f64]) -> Option<Vec<Rational>> {
    xs.iter().map(|&x| Rational::from_f64(x)).collect()
}

pub fn to_f64_vec<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(Scalar::to_f64).collect()
}

pub fn from_f64_vec<S: Scalar>(v: &[f64]) -> Option<Vec<S>> {
    v.iter().map(|&x| S::from_f64(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationalize_simple_fractions() {
        assert_eq!(rationalize(0.5, MAX_DENOMINATOR), Some((1, 2)));
        assert_eq!(rationalize(0.1, MAX_DENOMINATOR), Some((1, 10)));
        assert_eq!(rationalize(-2.75, MAX_DENOMINATOR), Some((-11, 4)));
        assert_eq!(rationalize(3.0, MAX_DENOMINATOR), Some((3, 1)));
        assert_eq!(rationalize(1.0 / 3.0, MAX_DENOMINATOR), Some((1, 3)));
    }

    #[test]
    fn rationalize_rejects_irrationals() {
        assert_eq!(rationalize(std::f64::consts::PI, MAX_DENOMINATOR), None);
        assert_eq!(rationalize(2f64.sqrt(), MAX_DENOMINATOR), None);
        assert_eq!(rationalize(f64::NAN, MAX_DENOMINATOR), None);
    }

    #[test]
    fn float_exponent_tolerance() {
        assert!(0.3f64.approx_eq(&(0.1 + 0.2)));
        assert!(!1.0f64.approx_eq(&1.000001));
        assert_eq!(2.0000000001f64.as_integer(), Some(2));
        assert_eq!(2.5f64.as_integer(), None);
    }

    #[test]
    fn rational_is_exact() {
        let a = Rational::from_ratio(1, 3);
        let b = Rational::from_f64(1.0 / 3.0).unwrap();
        assert!(a.approx_eq(&b));
        assert_eq!(Rational::from_ratio(6, 3).as_integer(), Some(2));
        assert!(Rational::from_ratio(1, 1_000_000_000).negligible(0.0) == false);
    }
}
