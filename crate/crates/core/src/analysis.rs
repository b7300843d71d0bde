//! Displacement-curve classification, strength reduction and the scalar
//! metrics reported by the scenario drivers.

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::material::MaterialParams;
use crate::neighbors::{build_pairs, BuiltOn};
use crate::scalar::{lit, to_f64, Real};
use crate::state::ParticleSystem;
use std::collections::HashMap;

/// Minimum curve length accepted by [`classify_curve`].
pub const MIN_SAMPLES: usize = 50;
/// Share of the curve, counted from the end, that is classified.
pub const TRAILING_FRACTION: f64 = 0.6;
/// Lag of the second differences, as a share of the window.
pub const LAG_FRACTION: f64 = 1.0 / 3.0;
/// Share of second differences dropped from each tail before averaging.
pub const TRIM_FRACTION: f64 = 0.1;
/// Rate change over the window, relative to the mean rate, that separates
/// acceleration from noise.
pub const CURVATURE_TOLERANCE: f64 = 0.1;
/// Final displacement below this fraction of the slope height can be stable.
pub const STABLE_FRACTION: f64 = 0.01;
/// Final displacement at or above this fraction of the slope height is failure.
pub const UNSTABLE_FRACTION: f64 = 0.05;

/// Time history of the largest particle displacement.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DisplacementCurve<T> {
    samples: Vec<(T, T)>,
}

impl<T: Real> DisplacementCurve<T> {
    pub fn new() -> Self {
        Self { samples: Vec::new() }
    }

    /// Builds a curve from `(t, d)` samples, rejecting non-increasing times
    /// and negative displacements.
    pub fn from_samples(samples: Vec<(T, T)>) -> Result<Self> {
        let mut c = Self::new();
        for (t, d) in samples {
            c.push(t, d)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, t: T, d: T) -> Result<()> {
        if !(d >= T::zero()) || !d.is_finite() || !t.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "displacement sample ({}, {}) is not a finite non-negative value",
                to_f64(t),
                to_f64(d)
            )));
        }
        if let Some(&(last, _)) = self.samples.last() {
            if !(t > last) {
                return Err(Error::InvalidGeometry(format!(
                    "sample time {} does not follow {}",
                    to_f64(t),
                    to_f64(last)
                )));
            }
        }
        self.samples.push((t, d));
        Ok(())
    }

    pub fn samples(&self) -> &[(T, T)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn final_displacement(&self) -> Option<T> {
        self.samples.last().map(|s| s.1)
    }

    /// Same curve with every time multiplied by `factor`.
    pub fn rescale_time(&self, factor: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&(t, d)| (t * factor, d)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveClass {
    /// Plateau: the displacement rate decays and the magnitude stays small.
    Stable,
    /// Runaway: the rate grows or the magnitude is already large.
    Unstable,
    Indeterminate,
}

impl CurveClass {
    pub fn name(self) -> &'static str {
        match self {
            CurveClass::Stable => "stable",
            CurveClass::Unstable => "unstable",
            CurveClass::Indeterminate => "indeterminate",
        }
    }
}

/// Curvature summary of the trailing window, used by [`classify_curve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveShape {
    /// Trimmed mean of the lagged second differences, as a change of rate.
    pub rate_change: f64,
    /// Mean absolute displacement rate over the window.
    pub mean_rate: f64,
}

impl CurveShape {
    pub fn accelerating(&self) -> bool {
        self.rate_change > CURVATURE_TOLERANCE * self.mean_rate
    }
}

/// Measures whether the displacement rate grows over the trailing window.
/// Second differences are taken at a lag of a third of the window: a
/// maximum over particles moves in jumps about as large as one sample's
/// increment, and unit-lag differences would only measure those.
pub fn curve_shape<T: Real>(curve: &DisplacementCurve<T>) -> Result<CurveShape> {
    let n = curve.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let keep = ((n as f64) * TRAILING_FRACTION).ceil() as usize;
    let w: Vec<(f64, f64)> = curve.samples[n - keep..]
        .iter()
        .map(|&(t, d)| (to_f64(t), to_f64(d)))
        .collect();
    let lag = ((keep as f64) * LAG_FRACTION).floor().max(1.0) as usize;
    let rate = |a: usize, b: usize| (w[b].1 - w[a].1) / (w[b].0 - w[a].0);
    let mut second: Vec<f64> = (0..keep - 2 * lag)
        .map(|i| rate(i + lag, i + 2 * lag) - rate(i, i + lag))
        .collect();
    second.sort_by(|a, b| a.total_cmp(b));
    let cut = ((second.len() as f64) * TRIM_FRACTION).floor() as usize;
    let core = &second[cut..second.len() - cut];
    let rate_change = if core.is_empty() {
        0.0
    } else {
        core.iter().sum::<f64>() / core.len() as f64
    };
    let mean_rate = (1..keep).map(|i| rate(i - 1, i).abs()).sum::<f64>() / (keep - 1) as f64;
    Ok(CurveShape { rate_change, mean_rate })
}

/// Classifies a post-reduction displacement history of a slope of height
/// `height`.
pub fn classify_curve<T: Real>(curve: &DisplacementCurve<T>, height: T) -> Result<CurveClass> {
    let shape = curve_shape(curve)?;
    let last = to_f64(curve.final_displacement().unwrap_or_else(T::zero));
    let height = to_f64(height);
    if shape.accelerating() || last >= UNSTABLE_FRACTION * height {
        Ok(CurveClass::Unstable)
    } else if last < STABLE_FRACTION * height {
        Ok(CurveClass::Stable)
    } else {
        Ok(CurveClass::Indeterminate)
    }
}

/// Material with cohesion and friction angle divided by `f_s`.
pub fn strength_reduce<T: Real>(mat: &MaterialParams<T>, factor: T) -> Result<MaterialParams<T>> {
    if !(factor >= T::one()) || !factor.is_finite() {
        return Err(Error::InvalidMaterial(format!(
            "reduction factor {} must be a finite value >= 1",
            to_f64(factor)
        )));
    }
    if factor == T::one() {
        return Ok(*mat);
    }
    mat.with_strength(mat.cohesion / factor, mat.friction_angle / factor)
}

/// Smallest distance between two interior particles, at least one of them
/// in tension (`p < 0`), divided by the lattice spacing. `None` when no
/// such pair lies within the kernel support.
pub fn clumping_metric<T: Real>(sys: &ParticleSystem<T>, spec: &KernelSpec<T>) -> Option<T> {
    let tension: Vec<bool> = sys
        .stress
        .iter()
        .map(|s| s.invariants().pressure < T::zero())
        .collect();
    let pairs = build_pairs(&sys.pos, spec, BuiltOn::Current);
    pairs
        .pairs
        .iter()
        .filter(|p| sys.is_interior(p.i) && sys.is_interior(p.j) && (tension[p.i] || tension[p.j]))
        .map(|p| p.r.norm() / sys.spacing)
        .reduce(|a, b| a.min(b))
}

/// Number of connected clusters among interior particles whose accumulated
/// plastic strain is above the given percentile. Particles closer than
/// `1.5 Δp` are connected; clusters of one particle are ignored.
pub fn shear_band_count<T: Real>(sys: &ParticleSystem<T>, percentile: f64) -> usize {
    let interior: Vec<usize> = sys.interior_indices().collect();
    if interior.is_empty() {
        return 0;
    }
    let mut strains: Vec<f64> = interior.iter().map(|&i| to_f64(sys.eps_p[i])).collect();
    strains.sort_by(|a, b| a.total_cmp(b));
    let rank = ((strains.len() - 1) as f64 * percentile.clamp(0.0, 1.0)).round() as usize;
    let threshold = strains[rank];
    let hot: Vec<usize> = interior
        .into_iter()
        .filter(|&i| to_f64(sys.eps_p[i]) > threshold && sys.eps_p[i] > T::zero())
        .collect();
    if hot.is_empty() {
        return 0;
    }
    let pos: Vec<_> = hot.iter().map(|&i| sys.pos[i]).collect();
    // kernel support 2h = 1.5 Δp
    let spec = KernelSpec::new(sys.spacing * lit(0.75));
    let pairs = build_pairs(&pos, &spec, BuiltOn::Current);
    let mut uf = UnionFind::<usize>::new(hot.len());
    for p in &pairs.pairs {
        uf.union(p.i, p.j);
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for k in 0..hot.len() {
        *sizes.entry(uf.find(k)).or_default() += 1;
    }
    sizes.values().filter(|&&s| s > 1).count()
}

/// Horizontal extent of the interior particles, `max x − min x`.
pub fn runout_width<T: Real>(sys: &ParticleSystem<T>) -> T {
    let mut lo: Option<T> = None;
    let mut hi: Option<T> = None;
    for i in sys.interior_indices() {
        let x = sys.pos[i].x;
        lo = Some(lo.map_or(x, |v| v.min(x)));
        hi = Some(hi.map_or(x, |v| v.max(x)));
    }
    match (lo, hi) {
        (Some(a), Some(b)) => b - a,
        _ => T::zero(),
    }
}

/// Largest deviation of `σ_yy` at an interior particle from the mean of its
/// lattice neighbours directly above and below. Particles within `margin`
/// lattice cells of the block edges are skipped.
pub fn layer_oscillation<T: Real>(sys: &ParticleSystem<T>, margin: i32) -> T {
    let mut at: HashMap<[i32; 2], usize> = HashMap::new();
    let (mut imin, mut imax, mut jmin, mut jmax) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    for i in sys.interior_indices() {
        let l = sys.lattice[i];
        at.insert(l, i);
        imin = imin.min(l[0]);
        imax = imax.max(l[0]);
        jmin = jmin.min(l[1]);
        jmax = jmax.max(l[1]);
    }
    let mut worst = T::zero();
    for (&[i, j], &k) in &at {
        if i < imin + margin || i > imax - margin || j < jmin + margin || j > jmax - margin {
            continue;
        }
        let (Some(&below), Some(&above)) = (at.get(&[i, j - 1]), at.get(&[i, j + 1])) else {
            continue;
        };
        let mean = (sys.stress[below].yy + sys.stress[above].yy) * lit(0.5);
        worst = worst.max((sys.stress[k].yy - mean).abs());
    }
    worst
}
