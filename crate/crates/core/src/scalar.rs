//! Floating-point scalar abstraction.
//!
//! Every numeric module in this crate is written against [`Real`] so the same
//! code runs in `f32` and `f64`. The file formats and the command-line pipeline
//! are fixed to `f64` through the aliases at the crate root.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point: f32 or f64.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Widens a scalar to `f64` for reporting and serialization.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `max` that does not depend on which of the overlapping trait methods wins.
#[inline]
pub fn fmax<T: Real>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

#[inline]
pub fn fmin<T: Real>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}
