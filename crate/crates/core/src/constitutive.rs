//! Objective elastic predictor and Drucker–Prager plastic corrector.

use crate::material::MaterialParams;
use crate::scalar::{lit, Real};
use crate::tensor::{SymTensor2, Tensor2};

/// Strain rate and spin split from a velocity gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StrainRateState<T> {
    /// Symmetric part of `l`; `zz = 0` (plane strain).
    pub eps_dot: SymTensor2<T>,
    /// `ω_xy` of the antisymmetric part `(l − lᵀ)/2`.
    pub spin: T,
}

impl<T: Real> StrainRateState<T> {
    pub fn from_velocity_gradient(l: &Tensor2<T>) -> Self {
        Self {
            eps_dot: l.sym(),
            spin: l.skew_xy(),
        }
    }

    pub fn zero() -> Self {
        Self {
            eps_dot: SymTensor2::zero(),
            spin: T::zero(),
        }
    }
}

/// `ω·σ − σ·ω` for an in-plane spin.
#[inline]
pub fn jaumann_rotation<T: Real>(sigma: &SymTensor2<T>, spin: T) -> SymTensor2<T> {
    let two = lit::<T>(2.0);
    SymTensor2::new(
        two * spin * sigma.xy,
        -two * spin * sigma.xy,
        T::zero(),
        spin * (sigma.yy - sigma.xx),
    )
}

/// Objective stress rate `ω·σ − σ·ω + 2G ė + K tr(ε̇) I`.
#[inline]
pub fn stress_rate<T: Real>(
    sigma: &SymTensor2<T>,
    rate: &StrainRateState<T>,
    mat: &MaterialParams<T>,
) -> SymTensor2<T> {
    let tr = rate.eps_dot.trace();
    let dev = rate.eps_dot - SymTensor2::isotropic(tr / lit(3.0));
    jaumann_rotation(sigma, rate.spin)
        + dev.scale(lit::<T>(2.0) * mat.shear_modulus)
        + SymTensor2::isotropic(mat.bulk_modulus * tr)
}

/// Trial stress assuming a purely elastic increment over `dt`.
#[inline]
pub fn elastic_predict<T: Real>(
    sigma: &SymTensor2<T>,
    rate: &StrainRateState<T>,
    mat: &MaterialParams<T>,
    dt: T,
) -> SymTensor2<T> {
    *sigma + stress_rate(sigma, rate, mat).scale(dt)
}

/// Outcome of the plastic correction at one particle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnResult<T> {
    pub stress: SymTensor2<T>,
    pub d_lambda: T,
    /// Equivalent plastic strain increment `√(2/3 Δεᵖ:Δεᵖ)`.
    pub d_eps_p: T,
    /// The trial state lay beyond the apex and was projected onto it.
    pub apex: bool,
}

/// `f = √J2 − k_φ p − k_c`.
#[inline]
pub fn yield_function<T: Real>(sigma: &SymTensor2<T>, mat: &MaterialParams<T>) -> T {
    let inv = sigma.invariants();
    inv.j2.sqrt() - mat.k_phi * inv.pressure - mat.k_c
}

/// Relative slack below which a trial state counts as on the surface.
const YIELD_SLACK: f64 = 1e-12;

/// Returns a trial stress to the Drucker–Prager surface with the
/// non-associated potential `√J2 − k_ψ p`.
pub fn dp_return<T: Real>(sigma_star: &SymTensor2<T>, mat: &MaterialParams<T>) -> ReturnResult<T> {
    let elastic = ReturnResult {
        stress: *sigma_star,
        d_lambda: T::zero(),
        d_eps_p: T::zero(),
        apex: false,
    };
    if !mat.plastic {
        return elastic;
    }
    let inv = sigma_star.invariants();
    let sqrt_j2 = inv.j2.sqrt();
    let f = sqrt_j2 - mat.k_phi * inv.pressure - mat.k_c;
    let scale = mat
        .k_c
        .max((mat.k_phi * inv.pressure).abs())
        .max(sqrt_j2)
        .max(T::min_positive_value());
    if f <= lit::<T>(YIELD_SLACK) * scale {
        return elastic;
    }
    let g = mat.shear_modulus;
    let d_lambda = f / (g + mat.bulk_modulus * mat.k_phi * mat.k_psi);
    // |∂g/∂σ|² = 1/2 + k_ψ²/3
    let d_eps_p = d_lambda
        * (lit::<T>(2.0) / lit(3.0) * (lit::<T>(0.5) + mat.k_psi * mat.k_psi / lit(3.0))).sqrt();
    let reduced = sqrt_j2 - g * d_lambda;
    if reduced < T::zero() {
        let pressure = if mat.k_phi > T::zero() {
            -mat.k_c / mat.k_phi
        } else {
            inv.pressure
        };
        return ReturnResult {
            stress: SymTensor2::isotropic(-pressure),
            d_lambda,
            d_eps_p,
            apex: true,
        };
    }
    let deviator = inv.deviator.scale(reduced / sqrt_j2);
    let pressure = inv.pressure + mat.bulk_modulus * mat.k_psi * d_lambda;
    ReturnResult {
        stress: SymTensor2::from_deviator(&deviator, pressure),
        d_lambda,
        d_eps_p,
        apex: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::derive_material;
    use proptest::prelude::*;

    fn soil() -> MaterialParams<f64> {
        derive_material(1850.0, 1.5e6, 0.3, 5e3, 25f64.to_radians(), 0.0).unwrap()
    }

    #[test]
    fn no_deformation_keeps_stress() {
        let s = SymTensor2::new(-1e4, -2e4, -1.5e4, 3e3);
        assert_eq!(elastic_predict(&s, &StrainRateState::zero(), &soil(), 1e-4), s);
    }

    #[test]
    fn uniaxial_rate_increment() {
        let m = soil();
        let rate = StrainRateState {
            eps_dot: SymTensor2::new(1.0, 0.0, 0.0, 0.0),
            spin: 0.0,
        };
        let dt = 1e-4;
        let out = elastic_predict(&SymTensor2::zero(), &rate, &m, dt);
        let g = m.shear_modulus;
        let k = m.bulk_modulus;
        assert!((out.xx - (2.0 * g * 2.0 / 3.0 + k) * dt).abs() < 1e-9);
        assert!((out.yy - (-2.0 * g / 3.0 + k) * dt).abs() < 1e-9);
        assert!((out.zz - (-2.0 * g / 3.0 + k) * dt).abs() < 1e-9);
        assert_eq!(out.xy, 0.0);
    }

    #[test]
    fn pure_spin_preserves_invariants() {
        let s = SymTensor2::new(-1e4, -3e4, -2e4, 5e3);
        let rate = StrainRateState {
            eps_dot: SymTensor2::zero(),
            spin: 2.0,
        };
        let dt = 1e-4;
        let out = elastic_predict(&s, &rate, &soil(), dt);
        let (a, b) = (s.invariants(), out.invariants());
        assert!((a.pressure - b.pressure).abs() <= 1e-14 * a.pressure.abs());
        assert!((a.j2 - b.j2).abs() <= 10.0 * a.j2 * (2.0 * dt).powi(2));
    }

    #[test]
    fn rigid_spin_drift_is_first_order() {
        let m = soil();
        let s0 = SymTensor2::new(-1e4, -3e4, -2e4, 5e3);
        let rate = StrainRateState {
            eps_dot: SymTensor2::zero(),
            spin: 1.0,
        };
        let drift = |dt: f64| {
            let mut s = s0;
            let n = (1.0 / dt) as usize;
            for _ in 0..n {
                s = elastic_predict(&s, &rate, &m, dt);
            }
            (s.invariants().j2 - s0.invariants().j2).abs() / s0.invariants().j2
        };
        let (a, b) = (drift(1e-3), drift(5e-4));
        assert!(a < 1e-2 && (a / b - 2.0).abs() < 0.1, "{a} {b}");
    }

    #[test]
    fn compressive_hydrostatic_state_is_elastic() {
        let r = dp_return(&SymTensor2::isotropic(-5e4), &soil());
        assert_eq!(r.d_lambda, 0.0);
        assert_eq!(r.stress, SymTensor2::isotropic(-5e4));
    }

    #[test]
    fn frictionless_limit_returns_to_cohesion() {
        let m = derive_material(1850.0f64, 1.5e6, 0.3, 5e3, 0.0, 0.0).unwrap();
        // pure shear: J2 = xy²
        let trial = SymTensor2::new(0.0, 0.0, 0.0, 2.0 * m.k_c);
        let r = dp_return(&trial, &m);
        assert!((r.d_lambda - m.k_c / m.shear_modulus).abs() < 1e-15);
        assert!((r.stress.invariants().j2.sqrt() - m.k_c).abs() < 1e-9);
    }

    #[test]
    fn beyond_apex_projects_to_apex() {
        let m = soil();
        let r = dp_return(&SymTensor2::isotropic(3e4), &m);
        assert!(r.apex);
        let inv = r.stress.invariants();
        assert_eq!(inv.j2, 0.0);
        assert!((inv.pressure + m.k_c / m.k_phi).abs() < 1e-9);
        assert!(yield_function(&r.stress, &m).abs() < 1e-9);
    }

    #[test]
    fn elastic_material_skips_return() {
        let m = soil().elastic();
        let trial = SymTensor2::new(0.0, 0.0, 0.0, 1e6);
        assert_eq!(dp_return(&trial, &m).stress, trial);
    }

    proptest! {
        #[test]
        fn return_invariants(
            xx in -2e5f64..1e4, yy in -2e5f64..1e4, zz in -2e5f64..1e4, xy in -1e5f64..1e5,
            psi_deg in 0.0f64..25.0,
        ) {
            let m = derive_material(1850.0, 1.5e6, 0.3, 5e3, 25f64.to_radians(), psi_deg.to_radians()).unwrap();
            let trial = SymTensor2::new(xx, yy, zz, xy);
            let once = dp_return(&trial, &m);
            prop_assert!(once.d_lambda >= 0.0);
            let f_trial = yield_function(&trial, &m);
            prop_assert_eq!(once.d_lambda > 0.0, f_trial > 1e-12 * m.k_c.max(m.k_phi * trial.invariants().pressure.abs()).max(trial.invariants().j2.sqrt()));
            let twice = dp_return(&once.stress, &m);
            prop_assert_eq!(twice.stress, once.stress);
            let inv = once.stress.invariants();
            let scale = m.k_c.max(m.k_phi * inv.pressure.abs());
            prop_assert!(yield_function(&once.stress, &m) <= 1e-8 * scale);
            if once.d_lambda > 0.0 && !once.apex {
                let pstar = trial.invariants().pressure;
                prop_assert!(((inv.pressure - pstar) - m.bulk_modulus * m.k_psi * once.d_lambda).abs()
                    <= 1e-9 * inv.pressure.abs().max(1.0));
                let a = trial.invariants().deviator;
                let b = inv.deviator;
                let cos = a.ddot(&b) / (a.ddot(&a).sqrt() * b.ddot(&b).sqrt());
                prop_assert!((cos - 1.0).abs() < 1e-12);
            }
        }
    }
}
