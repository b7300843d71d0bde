//! Lattice builders for the block, soil-column and slope set-ups.
//!
//! Interior particles sit on cell centres `((i + ½)Δp, (j + ½)Δp)`. Boundary
//! particles continue the same lattice into the walls.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use crate::state::{ParticleKind, ParticleSystem};
use crate::tensor::Vec2;

/// Number of boundary layers needed to cover the kernel support `2h`.
pub fn boundary_layers<T: Real>(h: T, dp: T) -> usize {
    let n = to_f64(lit::<T>(2.0) * h / dp);
    // tolerate rounding in h/dp = 1.5 style ratios
    ((n - 1e-9).ceil() as usize).max(1)
}

/// Walls lining a rectangular block whose lower-left corner is the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Walls<T> {
    pub layers: usize,
    pub floor: bool,
    pub left: bool,
    pub right: bool,
    /// Extra floor length beyond the right edge of the block (m).
    pub floor_extension: T,
    /// Wall height above the floor (m); `None` means the block height.
    pub wall_height: Option<T>,
}

impl<T: Real> Walls<T> {
    /// Floor and both side walls.
    pub fn container(layers: usize) -> Self {
        Self {
            layers,
            floor: true,
            left: true,
            right: true,
            floor_extension: T::zero(),
            wall_height: None,
        }
    }

    pub fn none() -> Self {
        Self {
            layers: 0,
            floor: false,
            left: false,
            right: false,
            floor_extension: T::zero(),
            wall_height: None,
        }
    }
}

fn cells<T: Real>(length: T, dp: T, what: &str) -> Result<usize> {
    if !(length > T::zero()) || !length.is_finite() {
        return Err(Error::InvalidGeometry(format!("{what} must be positive")));
    }
    let n = to_f64(length / dp);
    let r = n.round();
    if (n - r).abs() > 1e-6 * n.max(1.0) || r < 1.0 {
        return Err(Error::InvalidGeometry(format!(
            "{what} = {} is not a multiple of dp = {}",
            to_f64(length),
            to_f64(dp)
        )));
    }
    Ok(r as usize)
}

fn check_spacing<T: Real>(dp: T) -> Result<()> {
    if !(dp > T::zero()) || !dp.is_finite() {
        return Err(Error::InvalidGeometry("dp must be positive".into()));
    }
    Ok(())
}

fn cell_centre<T: Real>(i: i32, j: i32, dp: T) -> Vec2<T> {
    let half = lit::<T>(0.5);
    Vec2::new(
        (T::from_i32(i).unwrap() + half) * dp,
        (T::from_i32(j).unwrap() + half) * dp,
    )
}

/// Rectangular `width × height` block of interior particles plus walls.
pub fn build_block<T: Real>(
    width: T,
    height: T,
    dp: T,
    rho0: T,
    walls: &Walls<T>,
) -> Result<ParticleSystem<T>> {
    check_spacing(dp)?;
    let nx = cells(width, dp, "width")? as i32;
    let ny = cells(height, dp, "height")? as i32;
    let mut sys = ParticleSystem::new(dp);
    for j in 0..ny {
        for i in 0..nx {
            sys.push(cell_centre(i, j, dp), [i, j], rho0, ParticleKind::Interior);
        }
    }
    let nl = walls.layers as i32;
    let ext = if walls.floor_extension > T::zero() {
        cells(walls.floor_extension, dp, "floor extension")? as i32
    } else {
        0
    };
    let wall_rows = match walls.wall_height {
        Some(hgt) => cells(hgt, dp, "wall height")? as i32,
        None => ny,
    };
    let x_lo = if walls.left { -nl } else { 0 };
    let x_hi = nx + ext + if walls.right { nl } else { 0 };
    if walls.floor {
        for j in -nl..0 {
            for i in x_lo..x_hi {
                sys.push(cell_centre(i, j, dp), [i, j], rho0, ParticleKind::Boundary);
            }
        }
    }
    for j in 0..wall_rows {
        if walls.left {
            for i in -nl..0 {
                sys.push(cell_centre(i, j, dp), [i, j], rho0, ParticleKind::Boundary);
            }
        }
        if walls.right {
            for i in nx + ext..nx + ext + nl {
                sys.push(cell_centre(i, j, dp), [i, j], rho0, ParticleKind::Boundary);
            }
        }
    }
    Ok(sys)
}

/// Soil column against a left wall, standing on a floor that extends
/// `runout` metres to the right of the column.
pub fn build_collapse<T: Real>(
    width: T,
    height: T,
    runout: T,
    dp: T,
    h: T,
    rho0: T,
) -> Result<ParticleSystem<T>> {
    let walls = Walls {
        layers: boundary_layers(h, dp),
        floor: true,
        left: true,
        right: true,
        floor_extension: runout,
        wall_height: Some(height),
    };
    build_block(width, height, dp, rho0, &walls)
}

/// Cross-section of a slope resting on a foundation layer.
///
/// ```text
///  rear wall
///  |<- crest ->|
///  |___________
///  |           \  face (angle)
///  |            \__________ toe
///  |                        |  front wall
///  |________________________|  foundation
///  ==========================  base
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeGeometry<T> {
    /// Crest height above the toe (m).
    pub height: T,
    /// Face inclination from the horizontal (rad).
    pub angle: T,
    pub foundation: T,
    pub crest_length: T,
    pub toe_length: T,
}

impl<T: Real> SlopeGeometry<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidGeometry(s.to_string()));
        if !(self.angle > T::zero() && self.angle < T::FRAC_PI_2()) {
            return Err(Error::InvalidGeometry(format!(
                "slope angle {:.3}° outside (0°, 90°)",
                to_f64(self.angle).to_degrees()
            )));
        }
        if !(self.height > T::zero()) {
            return bad("slope height must be positive");
        }
        if !(self.foundation >= T::zero()) || !(self.crest_length >= T::zero()) || !(self.toe_length >= T::zero()) {
            return bad("slope extents must be non-negative");
        }
        Ok(())
    }

    /// Horizontal length of the face.
    pub fn face_run(&self) -> T {
        self.height / self.angle.tan()
    }

    /// Total horizontal extent of the soil.
    pub fn length(&self) -> T {
        self.crest_length + self.face_run() + self.toe_length
    }

    /// Soil cross-section area.
    pub fn area(&self) -> T {
        self.length() * self.foundation
            + self.crest_length * self.height
            + lit::<T>(0.5) * self.height * self.face_run()
    }

    /// Does the point lie inside the soil region?
    pub fn contains(&self, p: Vec2<T>) -> bool {
        if p.x < T::zero() || p.y < T::zero() || p.x > self.length() {
            return false;
        }
        if p.y < self.foundation {
            return true;
        }
        let above = p.y - self.foundation;
        if above > self.height {
            return false;
        }
        p.x < self.crest_length + (self.height - above) / self.angle.tan()
    }
}

/// Slope lattice with fixed particles under the base, behind the rear wall
/// and in front of the foundation.
pub fn build_slope<T: Real>(
    geom: &SlopeGeometry<T>,
    dp: T,
    h: T,
    rho0: T,
) -> Result<ParticleSystem<T>> {
    geom.validate()?;
    check_spacing(dp)?;
    let nl = boundary_layers(h, dp) as i32;
    let nx = (to_f64(geom.length() / dp) - 1e-9).ceil() as i32;
    let ny = (to_f64((geom.foundation + geom.height) / dp) - 1e-9).ceil() as i32;
    let nf = (to_f64(geom.foundation / dp) - 1e-9).ceil().max(0.0) as i32;
    let mut sys = ParticleSystem::new(dp);
    for j in 0..ny {
        for i in 0..nx {
            let c = cell_centre(i, j, dp);
            if geom.contains(c) {
                sys.push(c, [i, j], rho0, ParticleKind::Interior);
            }
        }
    }
    if sys.is_empty() {
        return Err(Error::InvalidGeometry("slope holds no particles".into()));
    }
    for j in -nl..0 {
        for i in -nl..nx + nl {
            sys.push(cell_centre(i, j, dp), [i, j], rho0, ParticleKind::Boundary);
        }
    }
    for j in 0..ny {
        for i in -nl..0 {
            sys.push(cell_centre(i, j, dp), [i, j], rho0, ParticleKind::Boundary);
        }
    }
    for j in 0..nf {
        for i in nx..nx + nl {
            sys.push(cell_centre(i, j, dp), [i, j], rho0, ParticleKind::Boundary);
        }
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_block_with_half_metre_spacing() {
        let s = build_block(1.0, 1.0, 0.5, 1850.0, &Walls::none()).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.pos[0], Vec2::new(0.25, 0.25));
        assert_eq!(s.pos[3], Vec2::new(0.75, 0.75));
    }

    #[test]
    fn layer_count_covers_support() {
        assert_eq!(boundary_layers(0.045, 0.03), 3);
        assert_eq!(boundary_layers(0.15, 0.1), 3);
        assert_eq!(boundary_layers(0.1, 0.1), 2);
    }

    #[test]
    fn container_counts() {
        let s = build_block(0.6, 0.3, 0.03, 1850.0, &Walls::container(3)).unwrap();
        assert_eq!(s.count(ParticleKind::Interior), 20 * 10);
        assert_eq!(s.count(ParticleKind::Boundary), 3 * 26 + 2 * 3 * 10);
    }

    #[test]
    fn rejects_non_multiple_and_non_positive() {
        assert!(build_block(0.1, 0.1, 0.03, 1850.0, &Walls::none()).is_err());
        assert!(build_block(0.0, 0.3, 0.03, 1850.0, &Walls::none()).is_err());
        assert!(build_block(0.3, 0.3, -0.03, 1850.0, &Walls::none()).is_err());
    }

    #[test]
    fn slope_angle_validation() {
        let mut g = SlopeGeometry {
            height: 5.0,
            angle: 45f64.to_radians(),
            foundation: 1.0,
            crest_length: 4.0,
            toe_length: 3.0,
        };
        assert!(build_slope(&g, 0.1, 0.15, 1850.0).is_ok());
        g.angle = 90.1f64.to_radians();
        assert!(build_slope(&g, 0.1, 0.15, 1850.0).is_err());
        g.angle = 0.0;
        assert!(build_slope(&g, 0.1, 0.15, 1850.0).is_err());
    }
}
