//! Scalar abstraction for the numeric core.
//!
//! All estimating-equation arithmetic is written against [`Scalar`], so the
//! same code runs in `f32` or `f64`. Operations that draw random variates
//! additionally require [`SampleScalar`], which wires the scalar type to the
//! standard-normal and standard-exponential samplers of `rand_distr`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use rand::distributions::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Floating-point scalar usable throughout the numeric core.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + SampleUniform + Send + Sync + Debug + Display + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + NumAssign
        + Sum
        + SampleUniform
        + Send
        + Sync
        + Debug
        + Display
        + 'static
{
}

/// Scalar that can be sampled from the standard distributions the library needs.
pub trait SampleScalar: Scalar {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl SampleScalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Exp1.sample(rng)
    }
}

impl SampleScalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Exp1.sample(rng)
    }
}

/// Shorthand for lifting an `f64` constant into the generic scalar type.
#[inline]
pub(crate) fn real<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("f64 constant not representable in scalar type")
}
