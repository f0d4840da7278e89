//! Scalar abstraction: core math is generic over the float type.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the library: f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + core::iter::Sum
    + core::fmt::Debug
    + core::fmt::Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lift an f64 constant into this scalar type.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 constant")
    }

    /// Lower to f64 (used at reporting and serialization boundaries).
    fn f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Logistic sigmoid 1/(1+e^{-z}), evaluated without fast approximations.
pub fn sigmoid<S: Scalar>(z: S) -> S {
    S::one() / (S::one() + (-z).exp())
}
