//! Built-in oracle checks, shared by the `verify` command and the test
//! suites. Random inputs come from a seeded ChaCha stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{dp_return, yield_function};
use crate::geometry::{build_block, Walls};
use crate::integrator::{Method, Numerics, Simulation};
use crate::kernel::KernelSpec;
use crate::material::{derive_material, MaterialParams};
use crate::tensor::{SymTensor2, Tensor2, Vec2};
use crate::tlsph::{deformation_gradient, hourglass_force, ReferenceConfiguration};

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cohesive soil of the column test.
pub fn column_soil() -> MaterialParams<f64> {
    derive_material(1850.0, 1.5e6, 0.3, 5e3, 25f64.to_radians(), 0.0).expect("valid material")
}

/// Stiffer soil of the slope test.
pub fn slope_soil() -> MaterialParams<f64> {
    derive_material(1850.0, 100e6, 0.3, 5e3, 30f64.to_radians(), 0.0).expect("valid material")
}

/// `∫ W dA` over the support by composite Simpson in the radius.
pub fn kernel_integral(spec: &KernelSpec<f64>, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let r_max = spec.support_radius;
    let step = r_max / n as f64;
    let f = |r: f64| 2.0 * std::f64::consts::PI * r * spec.value(r);
    let mut s = f(0.0) + f(r_max);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * step);
    }
    s * step / 3.0
}

/// Largest relative gap between the analytic radial gradient and a central
/// difference of `W`, over `samples` random radii inside the support.
pub fn kernel_gradient_error(spec: &KernelSpec<f64>, samples: usize, rng: &mut impl Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let r = rng.gen_range(0.02..1.95) * spec.h;
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let dir = Vec2::new(theta.cos(), theta.sin());
        let g = spec.gradient(dir * r);
        let eps = 1e-6 * spec.h;
        let fd = (spec.value(r + eps) - spec.value(r - eps)) / (2.0 * eps);
        let analytic = g.dot(dir);
        let scale = fd.abs().max(1e-3 * spec.value(0.0) / spec.h);
        worst = worst.max((analytic - fd).abs() / scale);
    }
    worst
}

/// Summary of a batch of return-mapping trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnStats {
    /// Largest `f(σ) / max(k_c, k_φ|p|)` after the return.
    pub max_residual: f64,
    pub min_d_lambda: f64,
    /// Returning an already returned stress leaves it bit-identical.
    pub idempotent: bool,
    pub plastic_trials: usize,
}

/// Random trial stresses in a box spanning tension and compression.
pub fn dp_return_stats(mat: &MaterialParams<f64>, trials: usize, box_size: f64, rng: &mut impl Rng) -> ReturnStats {
    let mut stats = ReturnStats {
        max_residual: 0.0,
        min_d_lambda: f64::INFINITY,
        idempotent: true,
        plastic_trials: 0,
    };
    for _ in 0..trials {
        let mut c = || rng.gen_range(-box_size..box_size);
        let trial = SymTensor2::new(c(), c(), c(), c());
        let out = dp_return(&trial, mat);
        let p = out.stress.invariants().pressure;
        let scale = mat.k_c.max(mat.k_phi * p.abs());
        stats.max_residual = stats.max_residual.max(yield_function(&out.stress, mat) / scale);
        stats.min_d_lambda = stats.min_d_lambda.min(out.d_lambda);
        if out.d_lambda > 0.0 {
            stats.plastic_trials += 1;
        }
        let again = dp_return(&out.stress, mat);
        if again.stress != out.stress || again.d_lambda != 0.0 {
            stats.idempotent = false;
        }
    }
    stats
}

/// A random matrix with determinant in `[det_lo, det_hi]`.
pub fn random_affine(rng: &mut impl Rng, det_lo: f64, det_hi: f64) -> Tensor2<f64> {
    loop {
        let a = Tensor2::new(
            rng.gen_range(0.5..1.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.5..1.5),
        );
        let target = rng.gen_range(det_lo..det_hi);
        let d = a.det();
        if d > 0.2 {
            return a.scale((target / d).sqrt());
        }
    }
}

/// Largest `|F − A|` and hourglass force over `maps` random affine maps of an
/// `n × n` wall-free block with gradient correction.
pub fn affine_errors(n: usize, dp: f64, maps: usize, rng: &mut impl Rng) -> (f64, f64) {
    let side = n as f64 * dp;
    let spec = KernelSpec::new(1.5 * dp);
    let mut sys = build_block(side, side, dp, 1850.0, &Walls::none()).expect("valid block");
    let rc = ReferenceConfiguration::build(&sys, &spec, true, 0);
    let e = 1.5e6;
    let (mut f_err, mut hg): (f64, f64) = (0.0, 0.0);
    for _ in 0..maps {
        let a = random_affine(rng, 0.5, 2.0);
        let b = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for i in 0..sys.len() {
            sys.pos[i] = a.dot_vec(sys.ref_pos[i]) + b;
        }
        let f = deformation_gradient(&sys, &rc);
        f_err = f.iter().map(|fi| fi.max_abs_diff(&a)).fold(f_err, f64::max);
        let force = hourglass_force(&sys, &rc, &f, 50.0, e);
        hg = force.iter().map(|v| v.norm()).fold(hg, f64::max);
    }
    (f_err, hg)
}

/// Relative drift of total momentum of a weightless `n × n` cloud with
/// random velocities, plus the absolute allowance used by the check.
pub fn momentum_drift(method: Method, n: usize, steps: usize, rng: &mut impl Rng) -> (f64, f64, f64) {
    let dp = 0.03;
    let side = n as f64 * dp;
    let mut sys = build_block(side, side, dp, 1850.0, &Walls::none()).expect("valid block");
    for v in sys.vel.iter_mut() {
        *v = Vec2::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
    }
    let mut num = Numerics::new(method, 1e-4, 1.5 * dp);
    num.gravity = Vec2::zero();
    if method == Method::Cesph {
        num.gamma = 0.6;
    }
    let mut sim = Simulation::new(sys, column_soil(), num).expect("valid simulation");
    let p0 = sim.system.momentum();
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        if sim.step().is_err() {
            return (f64::INFINITY, p0.norm(), 0.0);
        }
        worst = worst.max((sim.system.momentum() - p0).norm());
    }
    let floor = 1850.0 * dp * dp * 1e-12;
    (worst, p0.norm(), floor)
}

/// The suites run by the `verify` command.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut r = rng(seed);
    for h in [0.045, 0.15] {
        let spec = KernelSpec::new(h);
        let q = kernel_integral(&spec, 4000);
        out.push(Check::new("kernel quadrature", (q - 1.0).abs() <= 1e-3, format!("h = {h}: ∫W = {q:.9}")));
        let g = kernel_gradient_error(&spec, 100, &mut r);
        out.push(Check::new("kernel gradient", g <= 1e-5, format!("h = {h}: max rel. error {g:.2e}")));
    }
    for (label, mat, size) in [("column soil", column_soil(), 2e5), ("slope soil", slope_soil(), 5e5)] {
        let s = dp_return_stats(&mat, 1000, size, &mut r);
        let ok = s.max_residual <= 1e-8 && s.min_d_lambda >= 0.0 && s.idempotent;
        out.push(Check::new(
            "drucker-prager return",
            ok,
            format!(
                "{label}: residual {:.2e}, min dλ {:.2e}, idempotent {}, {} plastic",
                s.max_residual, s.min_d_lambda, s.idempotent, s.plastic_trials
            ),
        ));
    }
    let (f_err, hg) = affine_errors(30, 0.03, 20, &mut r);
    let hg_limit = 1e-12 * 1.5e6 * 0.03;
    out.push(Check::new(
        "affine reproduction",
        f_err <= 1e-10 && hg < hg_limit,
        format!("max |F − A| {f_err:.2e}, max |f_hg| {hg:.2e} N/m"),
    ));
    for method in [Method::Cesph, Method::Tlsph] {
        let (drift, p0, floor) = momentum_drift(method, 20, 200, &mut r);
        out.push(Check::new(
            "momentum conservation",
            drift <= 1e-8 * p0 + floor,
            format!("{}: |Δ Σmv| {drift:.2e} of {p0:.3e}", method.name()),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_converges_to_one() {
        let q = kernel_integral(&KernelSpec::new(0.045), 4000);
        assert!((q - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_affine_respects_determinant() {
        let mut r = rng(1);
        for _ in 0..200 {
            let d = random_affine(&mut r, 0.5, 2.0).det();
            assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&d));
        }
    }
}
