//! Stress assignment for fixed dummy particles.

use crate::neighbors::NeighborTable;
use crate::scalar::Real;
use crate::state::{ParticleKind, ParticleSystem};
use crate::tensor::{SymTensor2, Vec2};

/// Sets the stress of every boundary particle to the Shepard average of its
/// interior neighbours, plus the weight of the soil column between the
/// neighbour and the dummy particle along gravity.
///
/// Boundary particles without interior neighbours get zero stress. The
/// weights come from the table, so the same routine serves the Eulerian
/// (current) and the total-Lagrangian (reference) neighbour sets.
pub fn mirror_boundary_stress<T: Real>(
    sys: &mut ParticleSystem<T>,
    table: &NeighborTable<T>,
    gravity: Vec2<T>,
) {
    let g = gravity.norm();
    let ghat = if g > T::zero() {
        gravity * (T::one() / g)
    } else {
        Vec2::zero()
    };
    for b in 0..sys.len() {
        if sys.kind[b] != ParticleKind::Boundary {
            continue;
        }
        let mut acc = SymTensor2::zero();
        let mut wsum = T::zero();
        for nb in table.of(b) {
            let j = nb.j;
            if !sys.is_interior(j) {
                continue;
            }
            // σ_b = σ_j − ρ_j (g·(x_b − x_j)) ĝ⊗ĝ
            let head = gravity.dot(sys.pos[b] - sys.pos[j]) * sys.rho[j];
            let weight = SymTensor2::new(
                ghat.x * ghat.x,
                ghat.y * ghat.y,
                T::zero(),
                ghat.x * ghat.y,
            );
            acc += (sys.stress[j] - weight.scale(head)).scale(nb.w);
            wsum += nb.w;
        }
        sys.stress[b] = if wsum > T::zero() {
            acc.scale(T::one() / wsum)
        } else {
            SymTensor2::zero()
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_block, Walls};
    use crate::kernel::KernelSpec;
    use crate::neighbors::{build_pairs, BuiltOn};

    #[test]
    fn floor_particles_extend_geostatic_profile() {
        let dp = 0.05f64;
        let spec = KernelSpec::new(1.5 * dp);
        let mut s = build_block(1.0, 0.5, dp, 2000.0, &Walls::container(3)).unwrap();
        let g = Vec2::new(0.0, -9.81);
        let top = 0.5;
        for i in s.interior_indices().collect::<Vec<_>>() {
            let depth = top - s.pos[i].y;
            s.stress[i] = SymTensor2::new(0.0, -2000.0 * 9.81 * depth, 0.0, 0.0);
        }
        let pairs = build_pairs(&s.pos, &spec, BuiltOn::Current);
        let table = NeighborTable::from_pairs(s.len(), &pairs);
        mirror_boundary_stress(&mut s, &table, g);
        for b in 0..s.len() {
            let p = s.pos[b];
            if s.kind[b] == ParticleKind::Boundary && p.y < 0.0 && p.x > 0.2 && p.x < 0.8 {
                let expect = -2000.0 * 9.81 * (top - p.y);
                assert!((s.stress[b].yy - expect).abs() < 1e-6 * expect.abs(), "{p:?}");
            }
        }
    }
}
