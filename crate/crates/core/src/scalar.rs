//! Scalar abstraction for probability arithmetic.
//!
//! Closed-form baselines, confusion matrices and the enumeration oracle are
//! written once against [`Scalar`] and instantiated with `f64` for simulation
//! and with [`num_rational::BigRational`] when an exact answer is wanted.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Numeric type usable as a probability.
pub trait Scalar:
    Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `numer / denom`, exact where the type allows it.
    fn ratio(numer: u64, denom: u64) -> Self;

    /// Lossy conversion used by samplers and reports.
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Equality up to the tolerance appropriate for the type.
    fn near(&self, other: &Self) -> bool;
}

impl Scalar for f64 {
    fn ratio(numer: u64, denom: u64) -> Self {
        numer as f64 / denom as f64
    }

    fn near(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-9
    }
}

impl Scalar for f32 {
    fn ratio(numer: u64, denom: u64) -> Self {
        numer as f32 / denom as f32
    }

    fn near(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-5
    }
}

impl Scalar for BigRational {
    fn ratio(numer: u64, denom: u64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn near(&self, other: &Self) -> bool {
        self == other
    }
}

/// Sum of an iterator of scalars.
pub fn sum<T: Scalar>(items: impl IntoIterator<Item = T>) -> T {
    items.into_iter().fold(T::zero(), |acc, x| acc + x)
}

/// `base^exp` by repeated multiplication.
pub fn powi<T: Scalar>(base: &T, exp: u32) -> T {
    (0..exp).fold(T::one(), |acc, _| acc * base.clone())
}

/// True when `x` lies in the closed unit interval.
pub fn is_probability<T: Scalar>(x: &T) -> bool {
    *x >= T::zero() && *x <= T::one()
}

/// Convert an `f64` into `T`, exactly for rationals.
pub fn from_f64<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite probability")
}
