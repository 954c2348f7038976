//! Scalar abstraction shared by every numeric routine in the workspace.

use nalgebra as na;
use num_traits as nt;

/// Floating point scalar the control law and the simulator are generic over.
///
/// Implemented for `f32` and `f64`. Everything is written against
/// [`nalgebra::RealField`] so the usual matrix machinery is available, with
/// `num-traits` supplying lossless-enough conversions to and from `f64`.
pub trait Real:
    na::RealField + nt::FromPrimitive + nt::ToPrimitive + nt::FloatConst + Copy + Send + Sync
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the scalar type.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a scalar back to `f64` (for reporting and serialization).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}
