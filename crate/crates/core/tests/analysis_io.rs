use geosph::analysis::{classify_curve, clumping_metric, layer_oscillation, CurveClass, DisplacementCurve};
use geosph::config::{parse_config, Scenario};
use geosph::geometry::{build_block, Walls};
use geosph::io::{read_snapshot_csv, snapshot_rows, write_snapshot, RunWriter};
use geosph::kernel::KernelSpec;
use geosph::scenarios::{block_simulation, run_for};
use geosph::verify::column_soil;
use geosph::{Method, Numerics, SymTensor2D, Vec2D};
use proptest::prelude::*;

fn curve(f: impl Fn(f64) -> f64) -> DisplacementCurve<f64> {
    DisplacementCurve::from_samples((1..=150).map(|k| (k as f64 * 0.01, f(k as f64 * 0.01))).collect()).unwrap()
}

#[test]
fn settling_curve_is_stable() {
    let c = curve(|t| 0.02 * (1.0 - (-8.0 * t).exp()));
    assert_eq!(classify_curve(&c, 5.0).unwrap(), CurveClass::Stable);
}

#[test]
fn stepwise_creep_is_stable() {
    // a maximum over particles moves in jumps; the plateau must still read as settling
    let c = curve(|t| {
        let k = (t * 100.0).round() as i64;
        let jitter = if k % 3 == 0 { 4e-6 } else { 0.0 };
        6e-4 * (1.0 - (-12.0 * t).exp()) + 6e-5 * t + jitter
    });
    assert_eq!(classify_curve(&c, 5.0).unwrap(), CurveClass::Stable);
}

#[test]
fn accelerating_curve_is_unstable() {
    let c = curve(|t| 0.01 * t * t * t);
    assert_eq!(classify_curve(&c, 5.0).unwrap(), CurveClass::Unstable);
}

#[test]
fn large_final_displacement_is_unstable() {
    let c = curve(|t| 0.3 * (1.0 - (-3.0 * t).exp()));
    assert_eq!(classify_curve(&c, 5.0).unwrap(), CurveClass::Unstable);
}

#[test]
fn short_curves_are_rejected() {
    let c = DisplacementCurve::from_samples((1..20).map(|k| (k as f64, 0.0)).collect()).unwrap();
    assert!(classify_curve(&c, 5.0).is_err());
    assert!(DisplacementCurve::from_samples(vec![(1.0, 0.0), (1.0, 0.1)]).is_err());
    assert!(DisplacementCurve::from_samples(vec![(1.0, -0.1)]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn class_ignores_time_units(a in 0.0..0.2f64, rate in 0.5..10.0f64, scale in 0.1..10.0f64) {
        let c = curve(|t| a * (1.0 - (-rate * t).exp()));
        prop_assert_eq!(classify_curve(&c, 5.0).unwrap(), classify_curve(&c.rescale_time(scale), 5.0).unwrap());
    }
}

#[test]
fn lattice_has_unit_clumping_and_no_oscillation() {
    let mut sys = build_block(0.6, 0.6, 0.03, 1850.0, &Walls::none()).unwrap();
    let spec = KernelSpec::new(0.045);
    assert_eq!(clumping_metric(&sys, &spec), None);
    for s in sys.stress.iter_mut() {
        *s = SymTensor2D::isotropic(1e3);
    }
    let m = clumping_metric(&sys, &spec).unwrap();
    assert!((m - 1.0).abs() < 1e-12);
    sys.pos[0] = Vec2D::new(sys.pos[0].x + 0.015, sys.pos[0].y);
    assert!((clumping_metric(&sys, &spec).unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(layer_oscillation(&sys, 2), 0.0);
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut sys = build_block(0.12, 0.09, 0.03, 1850.0, &Walls::container(2)).unwrap();
    sys.stress[1] = SymTensor2D::new(-1.0e4, -2.5e4, -1.2e4, 321.0);
    sys.eps_p[1] = 0.125;
    let (vtk, csv) = write_snapshot(&sys, 3, 0.25, dir.path(), "s").unwrap();
    let rows = read_snapshot_csv(&csv).unwrap();
    assert_eq!(rows, snapshot_rows(&sys, 3));
    let text = std::fs::read_to_string(vtk).unwrap();
    assert!(text.starts_with("# vtk DataFile Version 3.0"));
    assert!(text.contains(&format!("POINTS {} double", sys.len())));
}

#[test]
fn run_writer_emits_logs_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let mut num = Numerics::new(Method::Cesph, 1e-4, 0.045);
    num.gamma = 0.6;
    let mut sim = block_simulation(0.3, 0.3, 0.03, &column_soil(), &num).unwrap();
    let mut w = RunWriter::new(dir.path(), 10, 0.005).unwrap();
    let s = run_for(&mut sim, 0.01, 0.005, &mut w).unwrap();
    assert!(s.outcome.completed());
    let progress = std::fs::read_to_string(dir.path().join("progress.csv")).unwrap();
    assert!(progress.starts_with("step,t,d_max,max_displacement,kinetic_energy"));
    assert_eq!(progress.lines().count(), 11);
    assert!(dir.path().join("diagnostics.csv").exists());
    let snaps = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".vtk"))
        .count();
    assert!(snaps >= 2, "{snaps} snapshots");
}

const SLOPE: &str = r#"
[material]
rho0 = 1850.0
youngs_modulus = 100e6
poisson_ratio = 0.3
cohesion = 5e3
friction_angle = 30.0

[numerics]
method = "TLSPH"
dt = 1e-4
dp = 0.1
h = 0.15

[scenario]
kind = "slope"
slope_angle = 45.0
"#;

#[test]
fn slope_config_is_accepted() {
    let c = parse_config(SLOPE).unwrap().config;
    assert_eq!(c.dp, 0.1);
    assert_eq!(c.numerics.h, 0.15);
    match c.scenario {
        Scenario::Slope(s) => assert!((s.geometry.angle - 45f64.to_radians()).abs() < 1e-15),
        other => panic!("wrong scenario {other:?}"),
    }
}

#[test]
fn vertical_overhang_is_rejected() {
    let bad = SLOPE.replace("slope_angle = 45.0", "slope_angle = 90.1");
    let e = parse_config(&bad).unwrap_err().to_string();
    assert!(e.contains("slope"), "{e}");
}

#[test]
fn hash_follows_content() {
    let a = parse_config(SLOPE).unwrap().config;
    let b = parse_config(&SLOPE.replace("cohesion = 5e3", "cohesion = 6e3")).unwrap().config;
    assert_eq!(a.hash(), parse_config(SLOPE).unwrap().config.hash());
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 12);
}
