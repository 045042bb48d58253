//! Scalar abstractions shared by the numeric modules.
//!
//! Cost-model arithmetic is exact and generic over [`Count`] (`u64`, `u128`,
//! `BigUint`, ...). Information-theoretic quantities are generic over
//! [`Real`] (`f32`, `f64`). Game-of-24 rationals are generic over the
//! integer behind them via [`RatInt`].

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::iter::Sum;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Float, FromPrimitive, Signed, ToPrimitive};

/// Exact non-negative counts: FLOPs, parameters, token products.
pub trait Count:
    Integer
    + Clone
    + Debug
    + Display
    + CheckedAdd
    + CheckedMul
    + CheckedSub
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
{
}

impl<T> Count for T where
    T: Integer
        + Clone
        + Debug
        + Display
        + CheckedAdd
        + CheckedMul
        + CheckedSub
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
{
}

/// Floating point: f32 or f64.
pub trait Real: Float + FromPrimitive + Debug + Display + Sum + Send + Sync {}

impl<T> Real for T where T: Float + FromPrimitive + Debug + Display + Sum + Send + Sync {}

/// Signed integers usable as the numerator/denominator of an exact rational.
pub trait RatInt:
    Integer
    + Signed
    + Clone
    + Hash
    + Debug
    + Display
    + FromStr
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
}

impl<T> RatInt for T where
    T: Integer
        + Signed
        + Clone
        + Hash
        + Debug
        + Display
        + FromStr
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

pub(crate) fn real<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("f64 literal representable")
}
