//! Plane-strain SPH for large deformation of soils.
//!
//! Two discretisations share one particle store and one constitutive law:
//! an Eulerian-kernel solver ([`cesph`]) and a total-Lagrangian solver with
//! hourglass control and reference-configuration updates ([`tlsph`]).
//! [`scenarios`] wires them into the soil-column collapse and the slope
//! strength-reduction analysis.
//!
//! Everything numeric is generic over [`Real`]; the aliases at the crate
//! root fix the scalar to `f64`.

pub mod analysis;
pub mod boundary;
pub mod cesph;
pub mod config;
pub mod constitutive;
pub mod error;
pub mod geometry;
pub mod integrator;
pub mod io;
pub mod kernel;
pub mod material;
pub mod neighbors;
pub mod scalar;
pub mod scenarios;
pub mod state;
pub mod tensor;
pub mod tlsph;
pub mod verify;

pub use error::{Error, Result};
pub use integrator::{Method, Numerics, Simulation};
pub use scalar::Real;
pub use state::ParticleKind;

pub type Vec2D = tensor::Vec2<f64>;
pub type SymTensor2D = tensor::SymTensor2<f64>;
pub type Tensor2D = tensor::Tensor2<f64>;
pub type KernelSpecD = kernel::KernelSpec<f64>;
pub type MaterialParamsD = material::MaterialParams<f64>;
pub type ParticleSystemD = state::ParticleSystem<f64>;
pub type PairListD = neighbors::PairList<f64>;
pub type ReferenceConfigurationD = tlsph::ReferenceConfiguration<f64>;
pub type SimulationD = integrator::Simulation<f64>;
pub type NumericsD = integrator::Numerics<f64>;
pub type StrainRateStateD = constitutive::StrainRateState<f64>;
