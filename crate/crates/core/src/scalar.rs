//! Scalar abstraction shared by every numeric kernel in the crate.
//!
//! All matrix code is written against [`Real`] so that the same routines run
//! in `f64` (the default used by the simulator and the CLI) and in `f32`.
//! Tolerances are quoted for double precision and rescaled to the machine
//! epsilon of the chosen type through [`Real::tol`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the crate's kernels.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Lossy conversion to `f64` (used for I/O and for special functions).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Rescales a double-precision tolerance to this type's epsilon.
    ///
    /// For `f64` this is the identity; for `f32` a tolerance of `1e-12`
    /// becomes roughly `5e-4`.
    #[inline]
    fn tol(x: f64) -> Self {
        let ratio = Self::epsilon().as_f64() / f64::EPSILON;
        Self::lit(x * ratio.max(1.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] component type.
pub type Cx<T> = Complex<T>;

#[inline]
pub(crate) fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> Cx<T> {
    Complex::new(x, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_is_identity_for_f64() {
        assert_eq!(<f64 as Real>::tol(1e-10), 1e-10);
    }

    #[test]
    fn tol_scales_for_f32() {
        let t = <f32 as Real>::tol(1e-12);
        assert!(t > 1e-5 && t < 1e-3, "{t}");
    }
}
