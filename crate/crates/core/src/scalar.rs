use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Floating-point scalar used by every probabilistic computation.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance used when validating probability vectors.
    fn prob_tol() -> Self;

    /// Converts an `f64` literal. Panics only if the type cannot represent it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }
}

impl Real for f64 {
    fn prob_tol() -> f64 {
        1e-9
    }
}

impl Real for f32 {
    // 1e-9 is below f32 resolution; 64 ulps of 1.0 is the tightest useful bound.
    fn prob_tol() -> f32 {
        64.0 * f32::EPSILON
    }
}

/// Exact or approximate field arithmetic; enough for the hashing estimator.
pub trait Field: Num + Clone + FromPrimitive + Debug {}

impl<T: Num + Clone + FromPrimitive + Debug> Field for T {}
