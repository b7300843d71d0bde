//! Particle storage (structure of arrays).

use crate::scalar::{lit, Real};
use crate::tensor::{SymTensor2, Tensor2, Vec2};

/// Role of a particle in the sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParticleKind {
    /// Moves with the material.
    Interior,
    /// Fixed wall/floor dummy particle: zero velocity, stress mirrored from
    /// the adjacent interior field.
    Boundary,
}

impl ParticleKind {
    pub fn code(self) -> u8 {
        match self {
            ParticleKind::Interior => 0,
            ParticleKind::Boundary => 1,
        }
    }
}

/// All per-particle fields of a simulation.
///
/// `ref_pos` is the total-Lagrangian reference configuration `X`, which is
/// replaced on every configuration update; `origin` keeps the positions the
/// particles had when the system was built (or last restored) and is what
/// displacements are measured against.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleSystem<T> {
    pub origin: Vec<Vec2<T>>,
    pub ref_pos: Vec<Vec2<T>>,
    pub pos: Vec<Vec2<T>>,
    pub vel: Vec<Vec2<T>>,
    pub rho: Vec<T>,
    pub rho0: Vec<T>,
    pub mass: Vec<T>,
    /// Reference volume per unit depth (m²).
    pub vol0: Vec<T>,
    pub stress: Vec<SymTensor2<T>>,
    pub def_grad: Vec<Tensor2<T>>,
    pub eps_p: Vec<T>,
    pub kind: Vec<ParticleKind>,
    /// Integer lattice coordinates at construction.
    pub lattice: Vec<[i32; 2]>,
    /// Initial particle spacing Δp.
    pub spacing: T,
}

impl<T: Real> ParticleSystem<T> {
    pub fn new(spacing: T) -> Self {
        Self {
            spacing,
            ..Self::empty()
        }
    }

    fn empty() -> Self {
        Self {
            origin: Vec::new(),
            ref_pos: Vec::new(),
            pos: Vec::new(),
            vel: Vec::new(),
            rho: Vec::new(),
            rho0: Vec::new(),
            mass: Vec::new(),
            vol0: Vec::new(),
            stress: Vec::new(),
            def_grad: Vec::new(),
            eps_p: Vec::new(),
            kind: Vec::new(),
            lattice: Vec::new(),
            spacing: T::zero(),
        }
    }

    /// Appends an at-rest, stress-free particle with volume `dp²`.
    pub fn push(&mut self, x: Vec2<T>, lattice: [i32; 2], rho0: T, kind: ParticleKind) {
        let vol = self.spacing * self.spacing;
        self.origin.push(x);
        self.ref_pos.push(x);
        self.pos.push(x);
        self.vel.push(Vec2::zero());
        self.rho.push(rho0);
        self.rho0.push(rho0);
        self.mass.push(rho0 * vol);
        self.vol0.push(vol);
        self.stress.push(SymTensor2::zero());
        self.def_grad.push(Tensor2::identity());
        self.eps_p.push(T::zero());
        self.kind.push(kind);
        self.lattice.push(lattice);
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    #[inline]
    pub fn is_interior(&self, i: usize) -> bool {
        self.kind[i] == ParticleKind::Interior
    }

    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.is_interior(i))
    }

    pub fn count(&self, kind: ParticleKind) -> usize {
        self.kind.iter().filter(|&&k| k == kind).count()
    }

    pub fn total_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }

    pub fn momentum(&self) -> Vec2<T> {
        let mut p = Vec2::zero();
        for i in 0..self.len() {
            p += self.vel[i] * self.mass[i];
        }
        p
    }

    pub fn kinetic_energy(&self) -> T {
        let half = lit::<T>(0.5);
        (0..self.len())
            .map(|i| half * self.mass[i] * self.vel[i].norm_squared())
            .sum()
    }

    /// Kinetic energy of the interior particles per unit interior mass.
    pub fn specific_kinetic_energy(&self) -> T {
        let m: T = self.interior_indices().map(|i| self.mass[i]).sum();
        if m > T::zero() {
            self.kinetic_energy() / m
        } else {
            T::zero()
        }
    }

    /// `x − origin`.
    #[inline]
    pub fn displacement(&self, i: usize) -> Vec2<T> {
        self.pos[i] - self.origin[i]
    }

    pub fn max_displacement(&self) -> T {
        self.interior_indices()
            .map(|i| self.displacement(i).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_speed(&self) -> T {
        self.interior_indices()
            .map(|i| self.vel[i].norm())
            .fold(T::zero(), T::max)
    }

    /// Restores the build/origin positions and zeroes every field except the
    /// Cauchy stress.
    pub fn restore_keep_stress(&mut self) {
        for i in 0..self.len() {
            self.pos[i] = self.origin[i];
            self.ref_pos[i] = self.origin[i];
            self.vel[i] = Vec2::zero();
            self.def_grad[i] = Tensor2::identity();
            self.eps_p[i] = T::zero();
            self.vol0[i] = self.spacing * self.spacing;
            self.rho0[i] = self.mass[i] / self.vol0[i];
            self.rho[i] = self.rho0[i];
        }
    }

    /// Shifts the lattice so that it matches the current positions; used when
    /// a relaxed state becomes the new starting configuration.
    pub fn rebase_origin(&mut self) {
        self.origin.clone_from(&self.pos);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_equals_density_times_volume() {
        let mut s = ParticleSystem::new(0.03);
        s.push(Vec2::new(0.0, 0.0), [0, 0], 1850.0, ParticleKind::Interior);
        assert_eq!(s.mass[0], 1850.0 * 0.03 * 0.03);
        assert_eq!(s.vol0[0], 0.03 * 0.03);
        assert_eq!(s.def_grad[0], Tensor2::identity());
    }

    #[test]
    fn restore_keeps_only_stress() {
        let mut s = ParticleSystem::new(0.1);
        s.push(Vec2::new(1.0, 2.0), [0, 0], 2000.0, ParticleKind::Interior);
        s.pos[0] = Vec2::new(1.5, 2.5);
        s.vel[0] = Vec2::new(3.0, 0.0);
        s.eps_p[0] = 0.2;
        s.stress[0] = SymTensor2::isotropic(-1e4);
        s.restore_keep_stress();
        assert_eq!(s.pos[0], Vec2::new(1.0, 2.0));
        assert_eq!(s.vel[0], Vec2::zero());
        assert_eq!(s.eps_p[0], 0.0);
        assert_eq!(s.stress[0], SymTensor2::isotropic(-1e4));
        assert_eq!(s.max_displacement(), 0.0);
    }
}
