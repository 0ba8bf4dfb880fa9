//! Scalar abstraction for the numeric kernels.
//!
//! Policy evaluation, the robust estimators and the weight-law arithmetic are
//! written against this trait so they work for `f32` and `f64` alike. The
//! simulation and experiment layers fix `f64` (see the aliases at the crate
//! root); the certificate computations need the full 53-bit mantissa.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

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
    + Send
    + Sync
    + 'static
{
    /// Lossless embedding of small integer counts.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn approx(x: f64) -> Self {
        Self::from_f64(x).expect("f64 representable")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
