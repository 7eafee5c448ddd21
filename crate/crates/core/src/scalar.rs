//! Scalar abstraction for the learned linear models.
//!
//! The perceptron-family models (dialogue-act n-gram classifier, BIO sequence
//! tagger, candidate reranker) are generic over the weight type so they can run
//! in `f32` for compact model files or `f64` for training.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point weight type usable by the linear models.
pub trait Scalar:
    Float
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion for integer counts used in averaging.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::zero)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Logistic squashing used to turn a classifier margin into a confidence.
pub fn logistic<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}
