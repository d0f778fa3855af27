//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar used for currency, seconds, joules and probabilities.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar.
    fn lit(x: f64) -> Self;

    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64;

    /// Absolute slack used when comparing a realized value against its expectation.
    fn tie_slack(scale: Self) -> Self {
        Self::epsilon().sqrt() * scale.abs().max(Self::one())
    }
}

macro_rules! impl_real {
    ($($t:ty)*) => ($(
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    )*)
}

impl_real!(f32 f64);

/// Total order on scalars for deterministic tie-breaking; NaN sorts last.
pub(crate) fn cmp_real<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    a.as_f64().total_cmp(&b.as_f64())
}
