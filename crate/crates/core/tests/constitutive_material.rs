use geosph::analysis::strength_reduce;
use geosph::constitutive::{dp_return, yield_function, StrainRateState};
use geosph::material::{derive_material, dp_slope};
use geosph::verify::{column_soil, slope_soil};
use geosph::{SymTensor2D, Tensor2D};
use proptest::prelude::*;

fn stress(lim: f64) -> impl Strategy<Value = SymTensor2D> {
    (-lim..lim, -lim..lim, -lim..lim, -lim..lim).prop_map(|(a, b, c, d)| SymTensor2D::new(a, b, c, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn return_lands_on_or_inside_surface(s in stress(5e5), soil in 0..2usize) {
        let mat = if soil == 0 { column_soil() } else { slope_soil() };
        let out = dp_return(&s, &mat);
        let p = out.stress.invariants().pressure;
        let scale = mat.k_c.max(mat.k_phi * p.abs());
        prop_assert!(yield_function(&out.stress, &mat) <= 1e-8 * scale);
        prop_assert!(out.d_lambda >= 0.0);
        prop_assert!(out.d_eps_p >= 0.0);
    }

    #[test]
    fn return_is_idempotent(s in stress(5e5)) {
        let mat = column_soil();
        let once = dp_return(&s, &mat);
        let twice = dp_return(&once.stress, &mat);
        prop_assert_eq!(once.stress, twice.stress);
        prop_assert_eq!(twice.d_lambda, 0.0);
    }

    #[test]
    fn elastic_states_are_untouched(s in stress(5e5)) {
        let mat = column_soil();
        if yield_function(&s, &mat) < 0.0 {
            let out = dp_return(&s, &mat);
            prop_assert_eq!(out.stress, s);
            prop_assert_eq!(out.d_lambda, 0.0);
        }
    }

    #[test]
    fn doubling_stiffness_doubles_moduli(e in 1e5..1e9f64, nu in 0.0..0.49f64) {
        let a = derive_material(1850.0, e, nu, 5e3, 0.4, 0.0).unwrap();
        let b = derive_material(1850.0, 2.0 * e, nu, 5e3, 0.4, 0.0).unwrap();
        prop_assert_eq!(b.shear_modulus, 2.0 * a.shear_modulus);
        prop_assert_eq!(b.bulk_modulus, 2.0 * a.bulk_modulus);
    }

    #[test]
    fn strength_reduction_divides_inputs(fs in 1.0..4.0f64) {
        let m = slope_soil();
        let r = strength_reduce(&m, fs).unwrap();
        prop_assert!((r.cohesion - m.cohesion / fs).abs() <= 1e-12 * m.cohesion);
        prop_assert!((r.friction_angle - m.friction_angle / fs).abs() <= 1e-15);
        prop_assert!((r.k_phi - dp_slope(m.friction_angle / fs)).abs() <= 1e-15);
        prop_assert_eq!(r.shear_modulus, m.shear_modulus);
    }
}

#[test]
fn drucker_prager_constants_for_column_soil() {
    let m = column_soil();
    let t = 25f64.to_radians().tan();
    let k_phi = 3.0 * t / (9.0 + 12.0 * t * t).sqrt();
    assert!((m.k_phi - k_phi).abs() < 1e-15);
    assert!((m.k_c - 3.0 * 5e3 / (9.0 + 12.0 * t * t).sqrt()).abs() < 1e-9);
    assert_eq!(m.k_psi, 0.0);
    assert!((m.shear_modulus - 1.5e6 / 2.6).abs() < 1e-6);
    assert!((m.bulk_modulus - 1.5e6 / 1.2).abs() < 1e-6);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(derive_material(1850.0, -1.0, 0.3, 5e3, 0.4, 0.0).is_err());
    assert!(derive_material(1850.0, 1e6, 0.5, 5e3, 0.4, 0.0).is_err());
    assert!(derive_material(1850.0, 1e6, 0.3, -1.0, 0.4, 0.0).is_err());
    assert!(derive_material(0.0, 1e6, 0.3, 5e3, 0.4, 0.0).is_err());
    assert!(strength_reduce(&column_soil(), 0.9).is_err());
    assert_eq!(strength_reduce(&column_soil(), 1.0).unwrap(), column_soil());
}

#[test]
fn apex_projection_for_deep_tension() {
    let m = column_soil();
    let out = dp_return(&SymTensor2D::isotropic(1e6), &m);
    assert!(out.apex);
    let p = out.stress.invariants().pressure;
    assert!((p + m.k_c / m.k_phi).abs() < 1e-9 * m.k_c / m.k_phi);
    assert!(out.stress.invariants().j2 < 1e-12);
}

#[test]
fn strain_rate_split() {
    let l = Tensor2D::new(1.0, 3.0, -1.0, 2.0);
    let s = StrainRateState::from_velocity_gradient(&l);
    assert_eq!(s.eps_dot.xx, 1.0);
    assert_eq!(s.eps_dot.yy, 2.0);
    assert_eq!(s.eps_dot.xy, 1.0);
    assert_eq!(s.eps_dot.zz, 0.0);
    assert_eq!(s.spin, 2.0);
}
