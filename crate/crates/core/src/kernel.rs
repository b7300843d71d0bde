//! Wendland C2 smoothing kernel in two dimensions.

use crate::scalar::{lit, Real};
use crate::tensor::Vec2;

/// Smoothing length and the derived 2D normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec<T> {
    pub h: T,
    /// `7 / (32 π h²)`.
    pub alpha_d: T,
    /// `2h`.
    pub support_radius: T,
}

impl<T: Real> KernelSpec<T> {
    /// Panics if `h` is not strictly positive and finite.
    pub fn new(h: T) -> Self {
        assert!(h > T::zero() && h.is_finite(), "smoothing length must be positive");
        Self {
            h,
            alpha_d: lit::<T>(7.0) / (lit::<T>(32.0) * T::PI() * h * h),
            support_radius: lit::<T>(2.0) * h,
        }
    }

    /// `W(r)`; zero outside the support.
    #[inline]
    pub fn value(&self, r: T) -> T {
        let q = r / self.h;
        let two = lit::<T>(2.0);
        if q >= two {
            return T::zero();
        }
        let a = two - q;
        let a2 = a * a;
        self.alpha_d * (q + lit(0.5)) * a2 * a2
    }

    /// `dW/dq = −5 α_d q (2 − q)³`.
    #[inline]
    pub fn dw_dq(&self, q: T) -> T {
        let two = lit::<T>(2.0);
        if q >= two {
            return T::zero();
        }
        let a = two - q;
        -lit::<T>(5.0) * self.alpha_d * q * a * a * a
    }

    /// `∇W(r_vec) = dW/dq · r_vec / (h |r_vec|)`, written without the unit
    /// direction so that the origin maps to the zero vector.
    #[inline]
    pub fn gradient(&self, r: Vec2<T>) -> Vec2<T> {
        let q = r.norm() / self.h;
        let two = lit::<T>(2.0);
        if q >= two {
            return Vec2::zero();
        }
        let a = two - q;
        let factor = -lit::<T>(5.0) * self.alpha_d * a * a * a / (self.h * self.h);
        r * factor
    }

    /// Value and gradient in one evaluation.
    #[inline]
    pub fn value_and_gradient(&self, r: Vec2<T>) -> (T, Vec2<T>) {
        let dist = r.norm();
        let q = dist / self.h;
        let two = lit::<T>(2.0);
        if q >= two {
            return (T::zero(), Vec2::zero());
        }
        let a = two - q;
        let a3 = a * a * a;
        let w = self.alpha_d * (q + lit(0.5)) * a3 * a;
        let factor = -lit::<T>(5.0) * self.alpha_d * a3 / (self.h * self.h);
        (w, r * factor)
    }
}
