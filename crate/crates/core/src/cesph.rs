//! Eulerian-kernel SPH: continuity, momentum with artificial viscosity and
//! artificial pressure, and current-configuration velocity gradients.

use rayon::prelude::*;

use crate::constitutive::StrainRateState;
use crate::kernel::KernelSpec;
use crate::neighbors::NeighborTable;
use crate::scalar::{lit, Real};
use crate::state::ParticleSystem;
use crate::tensor::{Tensor2, Vec2};

/// Monaghan viscosity term `π_ij` for one pair.
///
/// `v_ij = v_i − v_j`, `x_ij = x_i − x_j`; `c_bar` and `rho_bar` are the pair
/// means of sound speed and density.
#[inline]
pub fn artificial_viscosity<T: Real>(
    v_ij: Vec2<T>,
    x_ij: Vec2<T>,
    c_bar: T,
    rho_bar: T,
    h: T,
    beta1: T,
    beta2: T,
) -> T {
    let vx = v_ij.dot(x_ij);
    if vx >= T::zero() {
        return T::zero();
    }
    let mu = h * vx / (x_ij.norm_squared() + lit::<T>(0.01) * h * h);
    (-beta1 * c_bar * mu + beta2 * mu * mu) / rho_bar
}

/// Anti-clumping term constants: `γ`, `W(Δp)` and the exponent
/// `n = W(0)/W(Δp)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArtificialPressure<T> {
    pub gamma: T,
    pub w_dp: T,
    pub exponent: T,
}

impl<T: Real> ArtificialPressure<T> {
    pub fn new(gamma: T, spec: &KernelSpec<T>, dp: T) -> Self {
        let w_dp = spec.value(dp);
        Self {
            gamma,
            w_dp,
            exponent: spec.value(T::zero()) / w_dp,
        }
    }

    /// `p^a_ij` for a pair with kernel value `w_ij`.
    #[inline]
    pub fn pair(&self, p_i: T, p_j: T, rho_i: T, rho_j: T, w_ij: T) -> T {
        artificial_pressure(p_i, p_j, rho_i, rho_j, w_ij, self.w_dp, self.exponent, self.gamma)
    }
}

/// `γ (p^a_i/ρ_i² + p^a_j/ρ_j²) (W_ij/W(Δp))ⁿ` with `p^a = max(−p, 0)`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn artificial_pressure<T: Real>(
    p_i: T,
    p_j: T,
    rho_i: T,
    rho_j: T,
    w_ij: T,
    w_dp: T,
    exponent: T,
    gamma: T,
) -> T {
    let ta = (-p_i).max(T::zero());
    let tb = (-p_j).max(T::zero());
    if gamma == T::zero() || (ta == T::zero() && tb == T::zero()) {
        return T::zero();
    }
    gamma * (ta / (rho_i * rho_i) + tb / (rho_j * rho_j)) * (w_ij / w_dp).powf(exponent)
}

/// Inputs of the Eulerian momentum equation other than the particles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CesphParams<T> {
    pub h: T,
    pub beta1: T,
    pub beta2: T,
    pub sound_speed: T,
    pub gravity: Vec2<T>,
    pub pressure: Option<ArtificialPressure<T>>,
}

/// All Eulerian rates for one evaluation. Boundary entries are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CesphRates<T> {
    pub accel: Vec<Vec2<T>>,
    pub drho: Vec<T>,
    pub rate: Vec<StrainRateState<T>>,
}

/// `dρ_i/dt = Σ_j m_j (v_i − v_j)·∇_iW`.
pub fn continuity_rhs<T: Real>(sys: &ParticleSystem<T>, table: &NeighborTable<T>) -> Vec<T> {
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if !sys.is_interior(i) {
                return T::zero();
            }
            table
                .of(i)
                .iter()
                .map(|nb| sys.mass[nb.j] * (sys.vel[i] - sys.vel[nb.j]).dot(nb.grad_w))
                .sum()
        })
        .collect()
}

/// `l_i = −Σ_j (v_i − v_j) ⊗ ∇_iW m_j/ρ_j`, split into strain rate and spin.
pub fn velocity_gradient_cesph<T: Real>(
    sys: &ParticleSystem<T>,
    table: &NeighborTable<T>,
) -> Vec<StrainRateState<T>> {
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if !sys.is_interior(i) {
                return StrainRateState::zero();
            }
            StrainRateState::from_velocity_gradient(&velocity_gradient_at(sys, table, i))
        })
        .collect()
}

#[inline]
fn velocity_gradient_at<T: Real>(sys: &ParticleSystem<T>, table: &NeighborTable<T>, i: usize) -> Tensor2<T> {
    let mut l = Tensor2::zero();
    for nb in table.of(i) {
        let j = nb.j;
        let vol = sys.mass[j] / sys.rho[j];
        l -= Tensor2::outer(sys.vel[i] - sys.vel[j], nb.grad_w * vol);
    }
    l
}

#[inline]
fn accel_at<T: Real>(
    sys: &ParticleSystem<T>,
    table: &NeighborTable<T>,
    prm: &CesphParams<T>,
    i: usize,
) -> Vec2<T> {
    let half = lit::<T>(0.5);
    let rho_i = sys.rho[i];
    let si = sys.stress[i].scale(T::one() / (rho_i * rho_i));
    let p_i = -sys.stress[i].trace() / lit(3.0);
    let mut a = Vec2::zero();
    for nb in table.of(i) {
        let j = nb.j;
        let rho_j = sys.rho[j];
        let mut t = si + sys.stress[j].scale(T::one() / (rho_j * rho_j));
        let pi = artificial_viscosity(
            sys.vel[i] - sys.vel[j],
            nb.r,
            prm.sound_speed,
            half * (rho_i + rho_j),
            prm.h,
            prm.beta1,
            prm.beta2,
        );
        let mut iso = pi;
        if let Some(ap) = &prm.pressure {
            let p_j = -sys.stress[j].trace() / lit(3.0);
            iso += ap.pair(p_i, p_j, rho_i, rho_j, nb.w);
        }
        t.xx -= iso;
        t.yy -= iso;
        a += t.dot_vec(nb.grad_w) * sys.mass[j];
    }
    a + prm.gravity
}

/// `dv_i/dt = Σ_j m_j (σ_i/ρ_i² + σ_j/ρ_j² − π_ij I − p^a_ij I)·∇_iW + g`.
pub fn momentum_rhs<T: Real>(
    sys: &ParticleSystem<T>,
    table: &NeighborTable<T>,
    prm: &CesphParams<T>,
) -> Vec<Vec2<T>> {
    (0..sys.len())
        .into_par_iter()
        .map(|i| {
            if sys.is_interior(i) {
                accel_at(sys, table, prm, i)
            } else {
                Vec2::zero()
            }
        })
        .collect()
}

/// Acceleration, density rate and strain rate in one pass.
pub fn evaluate<T: Real>(
    sys: &ParticleSystem<T>,
    table: &NeighborTable<T>,
    prm: &CesphParams<T>,
) -> CesphRates<T> {
    let half = lit::<T>(0.5);
    let third = T::one() / lit(3.0);
    let n = sys.len();
    let scaled: Vec<_> = (0..n)
        .map(|j| sys.stress[j].scale(T::one() / (sys.rho[j] * sys.rho[j])))
        .collect();
    let vol: Vec<T> = (0..n).map(|j| sys.mass[j] / sys.rho[j]).collect();
    let pressure: Vec<T> = sys.stress.iter().map(|s| -s.trace() * third).collect();
    let per: Vec<(Vec2<T>, T, StrainRateState<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !sys.is_interior(i) {
                return (Vec2::zero(), T::zero(), StrainRateState::zero());
            }
            let rho_i = sys.rho[i];
            let vi = sys.vel[i];
            let si = scaled[i];
            let p_i = pressure[i];
            let mut a = Vec2::zero();
            let mut drho = T::zero();
            let mut l = Tensor2::zero();
            for nb in table.of(i) {
                let j = nb.j;
                let m_j = sys.mass[j];
                let v = vi - sys.vel[j];
                drho += m_j * v.dot(nb.grad_w);
                l -= Tensor2::outer(v, nb.grad_w * vol[j]);
                let mut t = si + scaled[j];
                let mut iso = artificial_viscosity(
                    v,
                    nb.r,
                    prm.sound_speed,
                    half * (rho_i + sys.rho[j]),
                    prm.h,
                    prm.beta1,
                    prm.beta2,
                );
                if let Some(ap) = &prm.pressure {
                    iso += ap.pair(p_i, pressure[j], rho_i, sys.rho[j], nb.w);
                }
                t.xx -= iso;
                t.yy -= iso;
                a += t.dot_vec(nb.grad_w) * m_j;
            }
            (a + prm.gravity, drho, StrainRateState::from_velocity_gradient(&l))
        })
        .collect();
    let mut out = CesphRates {
        accel: Vec::with_capacity(per.len()),
        drho: Vec::with_capacity(per.len()),
        rate: Vec::with_capacity(per.len()),
    };
    for (a, d, r) in per {
        out.accel.push(a);
        out.drho.push(d);
        out.rate.push(r);
    }
    out
}
