//! Scalar abstractions shared by the numeric parts of the crate.
//!
//! Two traits are used:
//!
//! - [`Fraction`] is the minimum needed to express ratios of pixel counts
//!   (IoU, recall, accuracy). It is implemented for `f32`, `f64` and the exact
//!   rational [`Rational64`], so metric code can be checked without rounding.
//! - [`Real`] adds floating-point behavior (square roots, the complementary
//!   error function) for corner responses, density statistics and class
//!   probabilities.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub use num_rational::Rational64;

/// A field-like scalar that can be built from pixel counts.
pub trait Fraction: num_traits::Num + Clone + PartialOrd + Debug {
    fn from_count(n: u64) -> Self;
}

impl Fraction for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
}

impl Fraction for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl Fraction for Rational64 {
    fn from_count(n: u64) -> Self {
        let n = i64::try_from(n).expect("count exceeds i64 range");
        Rational64::from_integer(n)
    }
}

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + Fraction
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Display
    + Send
    + Sync
    + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Lossy conversion from `f64`, used for literals.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }
}

impl Real for f32 {
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Real for f64 {
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}
