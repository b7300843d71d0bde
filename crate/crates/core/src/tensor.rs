//! Plane-strain tensor algebra.
//!
//! Kinematics are two-dimensional, but stresses carry an explicit out-of-plane
//! `zz` component so that pressure and `J2` are the true three-dimensional
//! invariants required by the Drucker–Prager model.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::scalar::{lit, Real};

/// In-plane vector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl<T: Real> SubAssign for Vec2<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

/// Symmetric stress or strain-rate tensor with explicit `zz` (plane strain).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor2<T> {
    pub xx: T,
    pub yy: T,
    pub zz: T,
    pub xy: T,
}

/// Pressure, second deviatoric invariant and deviator of a stress state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariants<T> {
    /// `p = -tr(σ)/3`, positive in compression.
    pub pressure: T,
    /// `J2 = s:s/2`.
    pub j2: T,
    pub deviator: SymTensor2<T>,
}

impl<T: Real> SymTensor2<T> {
    #[inline]
    pub fn new(xx: T, yy: T, zz: T, xy: T) -> Self {
        Self { xx, yy, zz, xy }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    /// `s·I` (three-dimensional identity).
    #[inline]
    pub fn isotropic(s: T) -> Self {
        Self::new(s, s, s, T::zero())
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.xx + self.yy + self.zz
    }

    /// Full double contraction `a:b`, counting the off-diagonal twice.
    #[inline]
    pub fn ddot(&self, o: &Self) -> T {
        self.xx * o.xx + self.yy * o.yy + self.zz * o.zz + lit::<T>(2.0) * self.xy * o.xy
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        Self::new(self.xx * s, self.yy * s, self.zz * s, self.xy * s)
    }

    pub fn invariants(&self) -> Invariants<T> {
        let pressure = -self.trace() / lit(3.0);
        let deviator = *self + Self::isotropic(pressure);
        let j2 = (deviator.ddot(&deviator) * lit(0.5)).max(T::zero());
        Invariants {
            pressure,
            j2,
            deviator,
        }
    }

    /// Rebuilds `σ = s − pI`.
    #[inline]
    pub fn from_deviator(deviator: &Self, pressure: T) -> Self {
        *deviator - Self::isotropic(pressure)
    }

    /// In-plane product `σ·v`.
    #[inline]
    pub fn dot_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// In-plane block as a general 2×2 tensor.
    #[inline]
    pub fn in_plane(&self) -> Tensor2<T> {
        Tensor2::new(self.xx, self.xy, self.xy, self.yy)
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.zz.is_finite() && self.xy.is_finite()
    }
}

impl<T: Real> Add for SymTensor2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.xx + o.xx, self.yy + o.yy, self.zz + o.zz, self.xy + o.xy)
    }
}

impl<T: Real> Sub for SymTensor2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.xx - o.xx, self.yy - o.yy, self.zz - o.zz, self.xy - o.xy)
    }
}

impl<T: Real> AddAssign for SymTensor2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// General 2×2 tensor, row-major: `[[xx, xy], [yx, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor2<T> {
    pub xx: T,
    pub xy: T,
    pub yx: T,
    pub yy: T,
}

impl<T: Real> Tensor2<T> {
    #[inline]
    pub fn new(xx: T, xy: T, yx: T, yy: T) -> Self {
        Self { xx, xy, yx, yy }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    /// `a ⊗ b`, i.e. `(a ⊗ b)_kl = a_k b_l`.
    #[inline]
    pub fn outer(a: Vec2<T>, b: Vec2<T>) -> Self {
        Self::new(a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y)
    }

    #[inline]
    pub fn det(&self) -> T {
        self.xx * self.yy - self.xy * self.yx
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Self::new(self.xx, self.yx, self.xy, self.yy)
    }

    /// Inverse, or `None` when `|det| <= tol`.
    #[inline]
    pub fn try_inverse(&self, tol: T) -> Option<Self> {
        let d = self.det();
        if d.abs() <= tol || !d.is_finite() {
            return None;
        }
        let inv = T::one() / d;
        Some(Self::new(self.yy * inv, -self.xy * inv, -self.yx * inv, self.xx * inv))
    }

    #[inline]
    pub fn dot_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.yx * v.x + self.yy * v.y)
    }

    /// `Aᵀ·v`.
    #[inline]
    pub fn transpose_dot_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.xx * v.x + self.yx * v.y, self.xy * v.x + self.yy * v.y)
    }

    #[inline]
    pub fn matmul(&self, o: &Self) -> Self {
        Self::new(
            self.xx * o.xx + self.xy * o.yx,
            self.xx * o.xy + self.xy * o.yy,
            self.yx * o.xx + self.yy * o.yx,
            self.yx * o.xy + self.yy * o.yy,
        )
    }

    /// Product with the in-plane block of a symmetric tensor, `A·σ`.
    #[inline]
    pub fn matmul_sym(&self, s: &SymTensor2<T>) -> Self {
        self.matmul(&s.in_plane())
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yx * s, self.yy * s)
    }

    /// Symmetric part with zero `zz`.
    #[inline]
    pub fn sym(&self) -> SymTensor2<T> {
        SymTensor2::new(self.xx, self.yy, T::zero(), (self.xy + self.yx) * lit(0.5))
    }

    /// Independent component `ω_xy` of the skew part `(A − Aᵀ)/2`.
    #[inline]
    pub fn skew_xy(&self) -> T {
        (self.xy - self.yx) * lit(0.5)
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, o: &Self) -> T {
        (self.xx - o.xx)
            .abs()
            .max((self.xy - o.xy).abs())
            .max((self.yx - o.yx).abs())
            .max((self.yy - o.yy).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yx.is_finite() && self.yy.is_finite()
    }
}

impl<T: Real> Add for Tensor2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yx + o.yx, self.yy + o.yy)
    }
}

impl<T: Real> Sub for Tensor2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.xx - o.xx, self.xy - o.xy, self.yx - o.yx, self.yy - o.yy)
    }
}

impl<T: Real> AddAssign for Tensor2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.xx += o.xx;
        self.xy += o.xy;
        self.yx += o.yx;
        self.yy += o.yy;
    }
}

impl<T: Real> SubAssign for Tensor2<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.xx -= o.xx;
        self.xy -= o.xy;
        self.yx -= o.yx;
        self.yy -= o.yy;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hydrostatic_state_has_no_deviator() {
        let q = 2.5e4;
        let inv = SymTensor2::isotropic(-q).invariants();
        assert_eq!(inv.pressure, q);
        assert_eq!(inv.j2, 0.0);
        assert_eq!(inv.deviator, SymTensor2::zero());
    }

    #[test]
    fn zero_stress_invariants() {
        let inv = SymTensor2::<f64>::zero().invariants();
        assert_eq!((inv.pressure, inv.j2), (0.0, 0.0));
    }

    #[test]
    fn invariants_match_componentwise_arithmetic() {
        let t = SymTensor2::new(-100e3f64, -200e3, -150e3, 30e3);
        let inv = t.invariants();
        // componentwise: mean = -150 kPa
        let p = 150e3;
        let (sxx, syy, szz, sxy) = (-100e3 + p, -200e3 + p, -150e3 + p, 30e3);
        let j2 = 0.5 * (sxx * sxx + syy * syy + szz * szz + 2.0 * sxy * sxy);
        assert!((inv.pressure - p).abs() < 1e-9);
        assert!((inv.deviator.xx - sxx).abs() < 1e-9);
        assert!((inv.deviator.yy - syy).abs() < 1e-9);
        assert!((inv.deviator.zz - szz).abs() < 1e-9);
        assert!((inv.j2 - j2).abs() < 1e-3);
        assert!((j2 - 3.4e9).abs() < 1.0);
        assert!(inv.deviator.trace().abs() < 1e-9);
    }

    #[test]
    fn inverse_and_det() {
        let a = Tensor2::new(1.1, 0.05, 0.0, 0.95);
        let inv = a.try_inverse(1e-14).unwrap();
        let prod = a.matmul(&inv);
        assert!(prod.max_abs_diff(&Tensor2::identity()) < 1e-15);
        assert!(Tensor2::<f64>::zero().try_inverse(1e-12).is_none());
    }

    #[test]
    fn generic_over_f32() {
        let inv = SymTensor2::<f32>::new(-1.0, -2.0, -3.0, 0.0).invariants();
        assert!((inv.pressure - 2.0).abs() < 1e-6);
    }
}
