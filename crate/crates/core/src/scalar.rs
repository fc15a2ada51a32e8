//! Scalar abstraction shared by the numeric kernels.
//!
//! Network weights, per-sample gradients, and the DP-SGD primitives are
//! generic over [`Real`], implemented for `f32` and `f64`. Training,
//! accounting, and persistence run at `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the neural and privacy kernels.
pub trait Real: NdFloat + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display {
    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self;

    /// Lossless (for `f64`) widening used when serializing or accounting.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    #[inline]
    fn lit(value: f64) -> Self {
        value
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
