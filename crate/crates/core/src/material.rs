//! Elastic moduli and Drucker–Prager constants.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Homogeneous soil description plus its derived constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams<T> {
    pub rho0: T,
    pub youngs_modulus: T,
    pub poisson_ratio: T,
    pub shear_modulus: T,
    pub bulk_modulus: T,
    pub cohesion: T,
    /// Friction angle in radians.
    pub friction_angle: T,
    /// Dilatancy angle in radians.
    pub dilatancy_angle: T,
    pub k_phi: T,
    pub k_c: T,
    pub k_psi: T,
    /// `√(E/ρ₀)`.
    pub sound_speed: T,
    /// When false the return mapping is skipped (linear elasticity).
    pub plastic: bool,
}

/// Drucker–Prager slope `3 tanθ / √(9 + 12 tan²θ)`.
pub fn dp_slope<T: Real>(angle: T) -> T {
    let t = angle.tan();
    lit::<T>(3.0) * t / (lit::<T>(9.0) + lit::<T>(12.0) * t * t).sqrt()
}

/// Builds a material from the six physical inputs. Angles in radians.
pub fn derive_material<T: Real>(
    rho0: T,
    youngs_modulus: T,
    poisson_ratio: T,
    cohesion: T,
    friction_angle: T,
    dilatancy_angle: T,
) -> Result<MaterialParams<T>> {
    let bad = |what: &str| Err(Error::InvalidMaterial(what.to_string()));
    if !(rho0 > T::zero()) || !rho0.is_finite() {
        return bad("density must be positive");
    }
    if !(youngs_modulus > T::zero()) || !youngs_modulus.is_finite() {
        return bad("Young's modulus must be positive");
    }
    if !(poisson_ratio > -T::one() && poisson_ratio < lit(0.5)) {
        return Err(Error::InvalidMaterial(format!(
            "Poisson ratio {} outside (-1, 0.5)",
            to_f64(poisson_ratio)
        )));
    }
    if !(cohesion >= T::zero()) || !cohesion.is_finite() {
        return bad("cohesion must be non-negative");
    }
    if !(friction_angle >= T::zero() && friction_angle < T::FRAC_PI_2()) {
        return bad("friction angle must lie in [0, 90) degrees");
    }
    if !(dilatancy_angle >= T::zero() && dilatancy_angle <= friction_angle) {
        return bad("dilatancy angle must lie in [0, friction angle]");
    }
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let tan_phi = friction_angle.tan();
    let root = (lit::<T>(9.0) + lit::<T>(12.0) * tan_phi * tan_phi).sqrt();
    Ok(MaterialParams {
        rho0,
        youngs_modulus,
        poisson_ratio,
        shear_modulus: youngs_modulus / (two * (T::one() + poisson_ratio)),
        bulk_modulus: youngs_modulus / (three * (T::one() - two * poisson_ratio)),
        cohesion,
        friction_angle,
        dilatancy_angle,
        k_phi: three * tan_phi / root,
        k_c: three * cohesion / root,
        k_psi: dp_slope(dilatancy_angle),
        sound_speed: (youngs_modulus / rho0).sqrt(),
        plastic: true,
    })
}

impl<T: Real> MaterialParams<T> {
    /// Same material with plasticity switched off.
    pub fn elastic(mut self) -> Self {
        self.plastic = false;
        self
    }

    /// Recomputes every derived constant from new strength parameters.
    pub fn with_strength(&self, cohesion: T, friction_angle: T) -> Result<Self> {
        let mut m = derive_material(
            self.rho0,
            self.youngs_modulus,
            self.poisson_ratio,
            cohesion,
            friction_angle,
            self.dilatancy_angle.min(friction_angle),
        )?;
        m.plastic = self.plastic;
        Ok(m)
    }
}
