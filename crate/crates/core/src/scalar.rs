//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra as na;
use num_traits as nt;

/// Real floating point types the library is generic over (`f32`, `f64`).
pub trait Real:
    Copy + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + na::RealField + Send + Sync + 'static
{
    /// Converts an `f64` literal or tolerance into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] field.
pub type Cx<T> = na::Complex<T>;

#[inline]
pub(crate) fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    na::Complex::new(re, im)
}

/// `|z|` without requiring `num_traits::Float`.
#[inline]
pub(crate) fn modulus<T: Real>(z: Cx<T>) -> T {
    na::ComplexField::hypot(z.re, z.im)
}
