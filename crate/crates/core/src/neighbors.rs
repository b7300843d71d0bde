//! Fixed-radius pair search over a uniform background grid, gather-friendly
//! neighbor tables, and first-order kernel-gradient correction.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::kernel::KernelSpec;
use crate::scalar::{lit, Real};
use crate::tensor::{Tensor2, Vec2};

/// Which coordinates a pair list was evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltOn {
    Current,
    Reference,
}

/// One unordered interacting pair, stored with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair<T> {
    pub i: usize,
    pub j: usize,
    /// `x_i − x_j`.
    pub r: Vec2<T>,
    pub w: T,
    /// `∇_i W(x_ij)`.
    pub grad_w: Vec2<T>,
}

/// All pairs closer than the kernel support, sorted by `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairList<T> {
    pub pairs: Vec<Pair<T>>,
    pub built_on: BuiltOn,
    pub cutoff: T,
}

impl<T> PairList<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Above this many cells per particle the dense grid gives way to hashing.
const DENSE_CELLS_PER_PARTICLE: usize = 8;

enum Cells {
    Dense {
        nx: i64,
        ny: i64,
        starts: Vec<usize>,
        sorted: Vec<usize>,
    },
    Hashed(HashMap<(i64, i64), Vec<usize>>),
}

/// Uniform grid with cell edge equal to the search cutoff.
struct CellGrid<T> {
    origin: Vec2<T>,
    inv_cell: T,
    cells: Cells,
}

impl<T: Real> CellGrid<T> {
    fn build(positions: &[Vec2<T>], cell: T) -> Self {
        let mut lo = Vec2::new(T::infinity(), T::infinity());
        let mut hi = Vec2::new(T::neg_infinity(), T::neg_infinity());
        for p in positions {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        if positions.is_empty() {
            lo = Vec2::zero();
            hi = Vec2::zero();
        }
        let inv_cell = T::one() / cell;
        let span_x = ((hi.x - lo.x) * inv_cell).floor().to_i64().unwrap_or(i64::MAX / 4) + 1;
        let span_y = ((hi.y - lo.y) * inv_cell).floor().to_i64().unwrap_or(i64::MAX / 4) + 1;
        let dense_ok = span_x
            .checked_mul(span_y)
            .map(|c| (c as u128) <= (DENSE_CELLS_PER_PARTICLE * positions.len().max(16)) as u128)
            .unwrap_or(false);
        let mut grid = Self {
            origin: lo,
            inv_cell,
            cells: Cells::Hashed(HashMap::new()),
        };
        if dense_ok {
            let n_cells = (span_x * span_y) as usize;
            let mut counts = vec![0usize; n_cells + 1];
            let keys: Vec<usize> = positions
                .iter()
                .map(|p| {
                    let (cx, cy) = grid.cell_of(*p);
                    (cy * span_x + cx) as usize
                })
                .collect();
            for &k in &keys {
                counts[k + 1] += 1;
            }
            for c in 0..n_cells {
                counts[c + 1] += counts[c];
            }
            let mut fill = counts.clone();
            let mut sorted = vec![0usize; positions.len()];
            for (idx, &k) in keys.iter().enumerate() {
                sorted[fill[k]] = idx;
                fill[k] += 1;
            }
            grid.cells = Cells::Dense {
                nx: span_x,
                ny: span_y,
                starts: counts,
                sorted,
            };
        } else {
            let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
            for (idx, p) in positions.iter().enumerate() {
                map.entry(grid.cell_of(*p)).or_default().push(idx);
            }
            grid.cells = Cells::Hashed(map);
        }
        grid
    }

    #[inline]
    fn cell_of(&self, p: Vec2<T>) -> (i64, i64) {
        let cx = ((p.x - self.origin.x) * self.inv_cell).floor().to_i64().unwrap_or(0);
        let cy = ((p.y - self.origin.y) * self.inv_cell).floor().to_i64().unwrap_or(0);
        (cx, cy)
    }

    /// Calls `f` with every particle index in the 3×3 block around `cell`.
    #[inline]
    fn for_each_near(&self, cell: (i64, i64), mut f: impl FnMut(usize)) {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (cx, cy) = (cell.0 + dx, cell.1 + dy);
                match &self.cells {
                    Cells::Dense {
                        nx,
                        ny,
                        starts,
                        sorted,
                    } => {
                        if cx < 0 || cy < 0 || cx >= *nx || cy >= *ny {
                            continue;
                        }
                        let k = (cy * nx + cx) as usize;
                        for &idx in &sorted[starts[k]..starts[k + 1]] {
                            f(idx);
                        }
                    }
                    Cells::Hashed(map) => {
                        if let Some(list) = map.get(&(cx, cy)) {
                            for &idx in list {
                                f(idx);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Builds the exact pair set `{(i, j) : i < j, |x_i − x_j| < 2h}`.
pub fn build_pairs<T: Real>(
    positions: &[Vec2<T>],
    spec: &KernelSpec<T>,
    built_on: BuiltOn,
) -> PairList<T> {
    let cutoff = spec.support_radius;
    let grid = CellGrid::build(positions, cutoff);
    let cutoff2 = cutoff * cutoff;
    let per_particle: Vec<Vec<Pair<T>>> = (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let xi = positions[i];
            let mut js: Vec<usize> = Vec::with_capacity(32);
            grid.for_each_near(grid.cell_of(xi), |j| {
                if j > i && (xi - positions[j]).norm_squared() < cutoff2 {
                    js.push(j);
                }
            });
            js.sort_unstable();
            js.into_iter()
                .map(|j| {
                    let r = xi - positions[j];
                    let (w, grad_w) = spec.value_and_gradient(r);
                    Pair { i, j, r, w, grad_w }
                })
                .collect()
        })
        .collect();
    PairList {
        pairs: per_particle.into_iter().flatten().collect(),
        built_on,
        cutoff,
    }
}

/// O(N²) reference search; same ordering and contents as [`build_pairs`].
pub fn brute_force_pairs<T: Real>(
    positions: &[Vec2<T>],
    spec: &KernelSpec<T>,
    built_on: BuiltOn,
) -> PairList<T> {
    let cutoff2 = spec.support_radius * spec.support_radius;
    let mut pairs = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let r = positions[i] - positions[j];
            if r.norm_squared() < cutoff2 {
                let (w, grad_w) = spec.value_and_gradient(r);
                pairs.push(Pair { i, j, r, w, grad_w });
            }
        }
    }
    PairList {
        pairs,
        built_on,
        cutoff: spec.support_radius,
    }
}

/// Directed neighbor record seen from particle `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor<T> {
    pub j: usize,
    /// `x_i − x_j`.
    pub r: Vec2<T>,
    pub w: T,
    /// `∇_i W(x_ij)`.
    pub grad_w: Vec2<T>,
}

/// Compressed per-particle adjacency built from a [`PairList`]; each pair
/// appears once in the row of either endpoint.
#[derive(Clone, Debug, Default)]
pub struct NeighborTable<T> {
    offsets: Vec<usize>,
    entries: Vec<Neighbor<T>>,
}

impl<T: Real> NeighborTable<T> {
    pub fn from_pairs(n: usize, list: &PairList<T>) -> Self {
        let mut counts = vec![0usize; n + 1];
        for p in &list.pairs {
            counts[p.i + 1] += 1;
            counts[p.j + 1] += 1;
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let blank = Neighbor {
            j: 0,
            r: Vec2::zero(),
            w: T::zero(),
            grad_w: Vec2::zero(),
        };
        let mut entries = vec![blank; counts[n]];
        for p in &list.pairs {
            entries[fill[p.i]] = Neighbor {
                j: p.j,
                r: p.r,
                w: p.w,
                grad_w: p.grad_w,
            };
            fill[p.i] += 1;
            entries[fill[p.j]] = Neighbor {
                j: p.i,
                r: -p.r,
                w: p.w,
                grad_w: -p.grad_w,
            };
            fill[p.j] += 1;
        }
        Self {
            offsets: counts,
            entries,
        }
    }

    #[inline]
    pub fn of(&self, i: usize) -> &[Neighbor<T>] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rows per parallel work item when assembling tables.
const CHUNK: usize = 256;

/// Candidate lists with a skin, refreshed only when some particle has
/// moved more than half the skin since the last search. Every call to
/// [`VerletNeighbors::table`] still returns the exact `< 2h` neighbour set.
///
/// Rows of particles flagged as fixed skip other fixed particles. In
/// contact mode the rows of free particles keep only fixed ones.
#[derive(Clone, Debug)]
pub struct VerletNeighbors<T> {
    skin: T,
    fixed: Vec<bool>,
    contacts_only: bool,
    anchor: Vec<Vec2<T>>,
    offsets: Vec<usize>,
    candidates: Vec<usize>,
    rebuilds: usize,
}

/// Runs `row` over `0..n` in chunks and concatenates the rows in order.
fn assemble_rows<E: Send>(n: usize, row: impl Fn(usize, &mut Vec<E>) + Sync) -> (Vec<usize>, Vec<E>) {
    let parts: Vec<(Vec<usize>, Vec<E>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut lens = Vec::with_capacity(hi - lo);
            let mut out = Vec::with_capacity((hi - lo) * 32);
            for i in lo..hi {
                let before = out.len();
                row(i, &mut out);
                lens.push(out.len() - before);
            }
            (lens, out)
        })
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut entries = Vec::with_capacity(parts.iter().map(|p| p.1.len()).sum());
    for (lens, out) in parts {
        for l in lens {
            offsets.push(offsets.last().unwrap() + l);
        }
        entries.extend(out);
    }
    (offsets, entries)
}

impl<T: Real> VerletNeighbors<T> {
    pub fn new(skin: T) -> Self {
        Self {
            skin,
            fixed: Vec::new(),
            contacts_only: false,
            anchor: Vec::new(),
            offsets: vec![0],
            candidates: Vec::new(),
            rebuilds: 0,
        }
    }

    /// Marks particles whose mutual interactions are never needed.
    pub fn with_fixed(mut self, fixed: Vec<bool>) -> Self {
        self.fixed = fixed;
        self.anchor.clear();
        self
    }

    /// Keeps only pairs with exactly one fixed particle.
    pub fn contacts_only(mut self) -> Self {
        self.contacts_only = true;
        self.anchor.clear();
        self
    }

    /// Number of cell searches performed so far.
    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    fn stale(&self, positions: &[Vec2<T>]) -> bool {
        if self.anchor.len() != positions.len() {
            return true;
        }
        let limit = self.skin * lit(0.5);
        let limit2 = limit * limit;
        positions
            .iter()
            .zip(&self.anchor)
            .any(|(p, a)| (*p - *a).norm_squared() >= limit2)
    }

    fn rebuild(&mut self, positions: &[Vec2<T>], cutoff: T) {
        let radius = cutoff + self.skin;
        let grid = CellGrid::build(positions, radius);
        let r2 = radius * radius;
        let fixed = &self.fixed;
        let is_fixed = |k: usize| fixed.get(k).copied().unwrap_or(false);
        let contacts_only = self.contacts_only;
        let (offsets, candidates) = assemble_rows(positions.len(), |i, out: &mut Vec<usize>| {
            let xi = positions[i];
            let start = out.len();
            let fi = is_fixed(i);
            grid.for_each_near(grid.cell_of(xi), |j| {
                let keep = if fi { !is_fixed(j) } else { !contacts_only || is_fixed(j) };
                if j != i && keep && (xi - positions[j]).norm_squared() < r2 {
                    out.push(j);
                }
            });
            out[start..].sort_unstable();
        });
        self.offsets = offsets;
        self.candidates = candidates;
        self.anchor = positions.to_vec();
        self.rebuilds += 1;
    }

    /// Exact neighbour table at `positions`.
    pub fn table(&mut self, positions: &[Vec2<T>], spec: &KernelSpec<T>) -> NeighborTable<T> {
        let cutoff = spec.support_radius;
        if self.stale(positions) {
            self.rebuild(positions, cutoff);
        }
        let c2 = cutoff * cutoff;
        let (offsets, entries) = assemble_rows(positions.len(), |i, out: &mut Vec<Neighbor<T>>| {
            let xi = positions[i];
            for &j in &self.candidates[self.offsets[i]..self.offsets[i + 1]] {
                let r = xi - positions[j];
                if r.norm_squared() < c2 {
                    let (w, grad_w) = spec.value_and_gradient(r);
                    out.push(Neighbor { j, r, w, grad_w });
                }
            }
        });
        NeighborTable { offsets, entries }
    }
}

/// Per-particle correction matrices `L_i` plus the number of identity fallbacks.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionSet<T> {
    pub matrices: Vec<Tensor2<T>>,
    pub fallbacks: usize,
}

/// Below this |det| the moment matrix is treated as singular.
const SINGULAR_MOMENT: f64 = 1e-6;

/// Computes `L_i = B_i⁻ᵀ` with `B_i = −Σ_j X_ij ⊗ ∇W(X_ij) V_j`.
///
/// Premultiplying `∇W` by `L_i` makes `−Σ_j x_ij ⊗ L_i∇W V_j` reproduce any
/// affine map exactly. The transpose only matters when `B_i` is asymmetric.
/// Particles whose moment matrix is singular keep the identity.
pub fn compute_correction<T: Real>(
    n: usize,
    ref_pairs: &PairList<T>,
    volumes: &[T],
) -> CorrectionSet<T> {
    let mut moments = vec![Tensor2::zero(); n];
    for p in &ref_pairs.pairs {
        let m = Tensor2::outer(p.r, p.grad_w);
        moments[p.i] -= m.scale(volumes[p.j]);
        // X_ji ⊗ ∇W(X_ji) = X_ij ⊗ ∇W(X_ij)
        moments[p.j] -= m.scale(volumes[p.i]);
    }
    let tol = lit::<T>(SINGULAR_MOMENT);
    let mut fallbacks = 0;
    let matrices = moments
        .iter()
        .map(|b| match b.try_inverse(tol) {
            Some(inv) => inv.transpose(),
            None => {
                fallbacks += 1;
                Tensor2::identity()
            }
        })
        .collect();
    CorrectionSet {
        matrices,
        fallbacks,
    }
}
