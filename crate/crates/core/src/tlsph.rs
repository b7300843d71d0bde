//! Total-Lagrangian SPH on a frozen reference configuration.

use rayon::prelude::*;

use crate::cesph::artificial_viscosity;
use crate::constitutive::StrainRateState;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::neighbors::{build_pairs, compute_correction, BuiltOn, NeighborTable, PairList};
use crate::scalar::{lit, to_f64, Real};
use crate::state::ParticleSystem;
use crate::tensor::{SymTensor2, Tensor2, Vec2};

/// Which tensor is stored as the Piola stress.
///
/// Both give the same nodal force because the momentum sum contracts the
/// stored tensor on the matching index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Pk1Form {
    /// `P = J F⁻¹ σ` (nominal stress).
    #[default]
    Nominal,
    /// `P = J σ F⁻ᵀ`.
    Standard,
}

/// One frozen neighbour of particle `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefNeighbor<T> {
    pub j: usize,
    /// `X_i − X_j`.
    pub x0: Vec2<T>,
    /// `W(X_ij)`.
    pub w: T,
    /// `∇_iW(X_ij)`.
    pub grad: Vec2<T>,
    /// `L_i ∇_iW(X_ij)`.
    pub grad_i: Vec2<T>,
    /// `1/|X_ij|²`.
    pub inv_len2: T,
}

/// Frozen reference state: pair list, CSR neighbour rows with corrected
/// gradients, correction matrices and the update counter. Positions and
/// volumes live in [`ParticleSystem::ref_pos`] / [`ParticleSystem::vol0`].
///
/// Only interior particles are paired. Fixed boundary particles act through
/// current-configuration contact terms instead, so soil can slide along
/// walls between updates.
#[derive(Clone, Debug)]
pub struct ReferenceConfiguration<T> {
    pub pairs: PairList<T>,
    /// Kernel values of the frozen pairs, seen from both ends.
    pub table: NeighborTable<T>,
    pub correction: Vec<Tensor2<T>>,
    pub correction_fallbacks: usize,
    pub corrected: bool,
    pub epoch: usize,
    offsets: Vec<usize>,
    rows: Vec<RefNeighbor<T>>,
}

impl<T: Real> ReferenceConfiguration<T> {
    /// Freezes the current `ref_pos`/`vol0` of `sys`.
    pub fn build(sys: &ParticleSystem<T>, spec: &KernelSpec<T>, corrected: bool, epoch: usize) -> Self {
        let n = sys.len();
        let mut pairs = build_pairs(&sys.ref_pos, spec, BuiltOn::Reference);
        pairs.pairs.retain(|p| sys.is_interior(p.i) && sys.is_interior(p.j));
        let (correction, fallbacks) = if corrected {
            let c = compute_correction(n, &pairs, &sys.vol0);
            (c.matrices, c.fallbacks)
        } else {
            (vec![Tensor2::identity(); n], 0)
        };
        let table = NeighborTable::from_pairs(n, &pairs);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut rows = Vec::with_capacity(2 * pairs.len());
        offsets.push(0);
        for i in 0..n {
            for nb in table.of(i) {
                rows.push(RefNeighbor {
                    j: nb.j,
                    x0: nb.r,
                    w: nb.w,
                    grad: nb.grad_w,
                    grad_i: correction[i].dot_vec(nb.grad_w),
                    inv_len2: T::one() / nb.r.norm_squared(),
                });
            }
            offsets.push(rows.len());
        }
        Self {
            pairs,
            table,
            correction,
            correction_fallbacks: fallbacks,
            corrected,
            epoch,
            offsets,
            rows,
        }
    }

    #[inline]
    pub fn of(&self, i: usize) -> &[RefNeighbor<T>] {
        &self.rows[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Smallest admissible `J` before the run is declared broken.
pub const MIN_JACOBIAN: f64 = 1e-12;

/// `F_i = −Σ_j (x_i − x_j) ⊗ L_i∇_iW(X_ij) V₀_j`. Boundary particles are
/// rigid and keep `F = I`, as do particles without reference neighbours.
pub fn deformation_gradient<T: Real>(sys: &ParticleSystem<T>, rc: &ReferenceConfiguration<T>) -> Vec<Tensor2<T>> {
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if !sys.is_interior(i) || rc.of(i).is_empty() {
                return Tensor2::identity();
            }
            let mut f = Tensor2::zero();
            for nb in rc.of(i) {
                f -= Tensor2::outer(sys.pos[i] - sys.pos[nb.j], nb.grad_i * sys.vol0[nb.j]);
            }
            f
        })
        .collect()
}

/// Fails on the first interior particle whose `J` is at or below
/// [`MIN_JACOBIAN`].
pub fn check_jacobians<T: Real>(
    sys: &ParticleSystem<T>,
    f: &[Tensor2<T>],
    epoch: usize,
    time: T,
) -> Result<()> {
    let tol = lit::<T>(MIN_JACOBIAN);
    for i in 0..sys.len() {
        let j = f[i].det();
        if sys.is_interior(i) && !(j > tol) {
            return Err(Error::NegativeJacobian {
                particle: i,
                x: to_f64(sys.pos[i].x),
                y: to_f64(sys.pos[i].y),
                epoch,
                time: to_f64(time),
                jacobian: to_f64(j),
            });
        }
    }
    Ok(())
}

/// `Ḟ_i = −Σ_j (v_i − v_j) ⊗ L_i∇_iW(X_ij) V₀_j`.
pub fn deformation_gradient_rate<T: Real>(sys: &ParticleSystem<T>, rc: &ReferenceConfiguration<T>) -> Vec<Tensor2<T>> {
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if !sys.is_interior(i) {
                return Tensor2::zero();
            }
            let mut f = Tensor2::zero();
            for nb in rc.of(i) {
                f -= Tensor2::outer(sys.vel[i] - sys.vel[nb.j], nb.grad_i * sys.vol0[nb.j]);
            }
            f
        })
        .collect()
}

/// `l = Ḟ F⁻¹` split into strain rate and spin.
pub fn rate_from_gradients<T: Real>(f: &Tensor2<T>, fdot: &Tensor2<T>) -> Option<StrainRateState<T>> {
    let inv = f.try_inverse(lit(MIN_JACOBIAN))?;
    Some(StrainRateState::from_velocity_gradient(&fdot.matmul(&inv)))
}

/// Piola stress of the chosen form; `None` when `F` is singular.
pub fn pk1_stress<T: Real>(sigma: &SymTensor2<T>, f: &Tensor2<T>, form: Pk1Form) -> Option<Tensor2<T>> {
    let j = f.det();
    let inv = f.try_inverse(lit(MIN_JACOBIAN))?;
    let s = sigma.in_plane();
    Some(match form {
        Pk1Form::Nominal => inv.matmul(&s).scale(j),
        Pk1Form::Standard => s.matmul(&inv.transpose()).scale(j),
    })
}

/// `P·n` in the sense of the chosen form (`Pᵀn` for the nominal tensor).
#[inline]
#[cfg(test)]
fn traction<T: Real>(p: &Tensor2<T>, n: Vec2<T>, form: Pk1Form) -> Vec2<T> {
    match form {
        Pk1Form::Nominal => p.transpose_dot_vec(n),
        Pk1Form::Standard => p.dot_vec(n),
    }
}

/// Non-particle inputs of the total-Lagrangian momentum equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TlsphParams<T> {
    pub h: T,
    pub beta1: T,
    pub beta2: T,
    pub sound_speed: T,
    pub gravity: Vec2<T>,
    /// Hourglass penalty `α`; zero disables the term.
    pub alpha_hg: T,
    pub youngs_modulus: T,
    pub pk1_form: Pk1Form,
}

/// Per-evaluation kinematic quantities shared by the momentum and the
/// constitutive update.
#[derive(Clone, Debug, Default)]
pub struct Kinematics<T> {
    pub def_grad: Vec<Tensor2<T>>,
    pub jacobian: Vec<T>,
    pub inv: Vec<Tensor2<T>>,
    pub pk1: Vec<Tensor2<T>>,
}

impl<T: Real> Kinematics<T> {
    /// Derives `J`, `F⁻¹` and `P` from a deformation gradient field. Call
    /// [`check_jacobians`] first; singular entries fall back to identity.
    pub fn from_def_grad(sys: &ParticleSystem<T>, f: Vec<Tensor2<T>>, form: Pk1Form) -> Self {
        let tol = lit::<T>(MIN_JACOBIAN);
        let parts: Vec<(T, Tensor2<T>, Tensor2<T>)> = (0..sys.len())
            .into_par_iter()
            .map(|i| {
                let j = f[i].det();
                let inv = f[i].try_inverse(tol).unwrap_or_else(Tensor2::identity);
                let p = pk1_stress(&sys.stress[i], &f[i], form).unwrap_or_else(|| sys.stress[i].in_plane());
                (j, inv, p)
            })
            .collect();
        let mut k = Kinematics {
            def_grad: f,
            jacobian: Vec::with_capacity(parts.len()),
            inv: Vec::with_capacity(parts.len()),
            pk1: Vec::with_capacity(parts.len()),
        };
        for (j, inv, p) in parts {
            k.jacobian.push(j);
            k.inv.push(inv);
            k.pk1.push(p);
        }
        k
    }
}

/// One pair's hourglass error `e_ij = ½(F_i + F_j) X_ij − x_ij`.
#[inline]
pub fn hourglass_error<T: Real>(fi: &Tensor2<T>, fj: &Tensor2<T>, x0: Vec2<T>, x: Vec2<T>) -> Vec2<T> {
    (*fi + *fj).scale(lit(0.5)).dot_vec(x0) - x
}

#[inline]
fn hourglass_at<T: Real>(
    sys: &ParticleSystem<T>,
    rc: &ReferenceConfiguration<T>,
    f: &[Tensor2<T>],
    alpha: T,
    youngs: T,
    i: usize,
) -> Vec2<T> {
    let mut force = Vec2::zero();
    for nb in rc.of(i) {
        let j = nb.j;
        let x = sys.pos[i] - sys.pos[j];
        let e = hourglass_error(&f[i], &f[j], nb.x0, x);
        let x2 = x.norm_squared();
        if x2 == T::zero() {
            continue;
        }
        let s = e.dot(x) * nb.inv_len2 / x2 * nb.w * sys.vol0[j];
        force += x * s;
    }
    force * (lit::<T>(0.5) * alpha * youngs * sys.vol0[i])
}

/// Hourglass control force `f_i^HG` per particle (zero on boundaries).
pub fn hourglass_force<T: Real>(
    sys: &ParticleSystem<T>,
    rc: &ReferenceConfiguration<T>,
    f: &[Tensor2<T>],
    alpha: T,
    youngs: T,
) -> Vec<Vec2<T>> {
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if sys.is_interior(i) && alpha != T::zero() {
                hourglass_at(sys, rc, f, alpha, youngs, i)
            } else {
                Vec2::zero()
            }
        })
        .collect()
}

/// `P/ρ₀²` arranged so that a plain matrix-vector product gives the traction.
fn scaled_tractions<T: Real>(sys: &ParticleSystem<T>, k: &Kinematics<T>, form: Pk1Form) -> Vec<Tensor2<T>> {
    (0..sys.len())
        .map(|i| {
            let p = match form {
                Pk1Form::Nominal => k.pk1[i].transpose(),
                Pk1Form::Standard => k.pk1[i],
            };
            p.scale(T::one() / (sys.rho0[i] * sys.rho0[i]))
        })
        .collect()
}

/// Strength of the short-range wall repulsion relative to `c²`.
const WALL_REPULSION: f64 = 0.1;

/// Eulerian-form push of fixed boundary particles on interior particle `i`:
/// `Σ_b m_b (σ_i/ρ_i² + σ_b/ρ_b² − π_ib)·∇_iW(x_ib)`, plus a
/// Lennard-Jones repulsion `D[(r₀/r)¹² − (r₀/r)⁴] x_ib/r²` inside one
/// spacing. The stress term alone weakens once a particle gets closer than
/// the peak of `|∇W|`, which lets resting soil sink into the wall.
#[inline]
fn contact_at<T: Real>(sys: &ParticleSystem<T>, contacts: &NeighborTable<T>, prm: &TlsphParams<T>, i: usize) -> Vec2<T> {
    let half = lit::<T>(0.5);
    let si = sys.stress[i].scale(T::one() / (sys.rho[i] * sys.rho[i]));
    let r0 = sys.spacing;
    let d = prm.sound_speed * prm.sound_speed * lit(WALL_REPULSION);
    let mut a = Vec2::zero();
    for nb in contacts.of(i) {
        let b = nb.j;
        if sys.is_interior(b) {
            continue;
        }
        let r2 = nb.r.dot(nb.r);
        if r2 < r0 * r0 && r2 > T::zero() {
            let q2 = r0 * r0 / r2;
            let q4 = q2 * q2;
            a += nb.r * (d * (q4 * q4 * q4 - q4) / r2);
        }
        let sb = sys.stress[b].scale(T::one() / (sys.rho[b] * sys.rho[b]));
        let mut term = (si + sb).dot_vec(nb.grad_w);
        let v = sys.vel[i] - sys.vel[b];
        if v.dot(nb.r) < T::zero() {
            let rho_bar = half * (sys.rho[i] + sys.rho[b]);
            let pi = artificial_viscosity(v, nb.r, prm.sound_speed, rho_bar, prm.h, prm.beta1, prm.beta2);
            term -= nb.grad_w * pi;
        }
        a += term * sys.mass[b];
    }
    a
}

#[inline]
fn accel_at<T: Real>(
    sys: &ParticleSystem<T>,
    rc: &ReferenceConfiguration<T>,
    contacts: Option<&NeighborTable<T>>,
    k: &Kinematics<T>,
    tr: &[Tensor2<T>],
    prm: &TlsphParams<T>,
    i: usize,
) -> Vec2<T> {
    let half = lit::<T>(0.5);
    let hg = prm.alpha_hg != T::zero();
    let fi = k.def_grad[i];
    let mut a = contacts.map_or_else(Vec2::zero, |c| contact_at(sys, c, prm, i));
    let mut f_hg = Vec2::zero();
    for nb in rc.of(i) {
        let j = nb.j;
        let mut term = (tr[i] + tr[j]).dot_vec(nb.grad);
        let x = sys.pos[i] - sys.pos[j];
        let v = sys.vel[i] - sys.vel[j];
        if v.dot(x) < T::zero() {
            let rho_bar = half * (sys.rho[i] + sys.rho[j]);
            let pi = artificial_viscosity(v, x, prm.sound_speed, rho_bar, prm.h, prm.beta1, prm.beta2);
            let j_bar = half * (k.jacobian[i] + k.jacobian[j]);
            let f_bar = (fi + k.def_grad[j]).scale(half);
            let f_inv = f_bar.try_inverse(lit(MIN_JACOBIAN)).unwrap_or_else(Tensor2::identity);
            // (J̄ F̄⁻¹ π)ᵀ ∇W
            term -= f_inv.transpose_dot_vec(nb.grad) * (j_bar * pi);
        }
        a += term * sys.mass[j];
        if hg {
            let x2 = x.norm_squared();
            if x2 > T::zero() {
                let e = hourglass_error(&fi, &k.def_grad[j], nb.x0, x);
                f_hg += x * (e.dot(x) * nb.inv_len2 / x2 * nb.w * sys.vol0[j]);
            }
        }
    }
    let mut out = a + prm.gravity;
    if hg {
        let scale = half * prm.alpha_hg * prm.youngs_modulus * sys.vol0[i] / sys.mass[i];
        out += f_hg * scale;
    }
    out
}

/// `dv_i/dt = Σ_j m_j (P_i/ρ₀ᵢ² + P_j/ρ₀ⱼ² − Π_ij)·∇_iW(X_ij) + g + f_i^HG/m_i`,
/// plus the boundary contact terms when a current neighbour table is given.
pub fn momentum_rhs_tl<T: Real>(
    sys: &ParticleSystem<T>,
    rc: &ReferenceConfiguration<T>,
    contacts: Option<&NeighborTable<T>>,
    k: &Kinematics<T>,
    prm: &TlsphParams<T>,
) -> Vec<Vec2<T>> {
    let tr = scaled_tractions(sys, k, prm.pk1_form);
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if sys.is_interior(i) {
                accel_at(sys, rc, contacts, k, &tr, prm, i)
            } else {
                Vec2::zero()
            }
        })
        .collect()
}

/// Accelerations and strain rates for one evaluation.
pub fn evaluate<T: Real>(
    sys: &ParticleSystem<T>,
    rc: &ReferenceConfiguration<T>,
    contacts: Option<&NeighborTable<T>>,
    k: &Kinematics<T>,
    prm: &TlsphParams<T>,
) -> (Vec<Vec2<T>>, Vec<StrainRateState<T>>) {
    let tr = scaled_tractions(sys, k, prm.pk1_form);
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if !sys.is_interior(i) {
                return (Vec2::zero(), StrainRateState::zero());
            }
            let mut fdot = Tensor2::zero();
            for nb in rc.of(i) {
                fdot -= Tensor2::outer(sys.vel[i] - sys.vel[nb.j], nb.grad_i * sys.vol0[nb.j]);
            }
            let rate = StrainRateState::from_velocity_gradient(&fdot.matmul(&k.inv[i]));
            (accel_at(sys, rc, contacts, k, &tr, prm, i), rate)
        })
        .unzip()
}

/// `d^max = max_i max_j |(|x_ij| − |X_ij|)/|X_ij||` over the frozen pairs.
pub fn max_line_strain<T: Real>(sys: &ParticleSystem<T>, rc: &ReferenceConfiguration<T>) -> T {
    rc.pairs
        .pairs
        .iter()
        .map(|p| {
            let l0 = p.r.norm();
            ((sys.pos[p.i] - sys.pos[p.j]).norm() - l0).abs() / l0
        })
        .fold(T::zero(), T::max)
}

/// Makes the current configuration the new reference: `X ← x`,
/// `V₀ ← J V₀`, `ρ₀ = m/V₀`, `F ← I`, rebuilt pairs and corrections.
/// Stress, velocity and plastic strain are untouched.
pub fn update_configuration<T: Real>(
    sys: &mut ParticleSystem<T>,
    rc: &ReferenceConfiguration<T>,
    jacobian: &[T],
    spec: &KernelSpec<T>,
) -> ReferenceConfiguration<T> {
    for i in 0..sys.len() {
        sys.ref_pos[i] = sys.pos[i];
        if sys.is_interior(i) {
            sys.vol0[i] *= jacobian[i];
            sys.rho0[i] = sys.mass[i] / sys.vol0[i];
        }
        sys.def_grad[i] = Tensor2::identity();
    }
    ReferenceConfiguration::build(sys, spec, rc.corrected, rc.epoch + 1)
}

/// Runs [`update_configuration`] when `d^max ≥ k`; returns `d^max` and the
/// new configuration if one was made.
pub fn check_and_update_configuration<T: Real>(
    sys: &mut ParticleSystem<T>,
    rc: &ReferenceConfiguration<T>,
    jacobian: &[T],
    spec: &KernelSpec<T>,
    k_update: T,
) -> (T, Option<ReferenceConfiguration<T>>) {
    let d = max_line_strain(sys, rc);
    if d >= k_update {
        (d, Some(update_configuration(sys, rc, jacobian, spec)))
    } else {
        (d, None)
    }
}
