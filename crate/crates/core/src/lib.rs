//! Transmission problem for a thermoelastic Rayleigh beam on `(0, L0)`
//! coupled to an elastic Rayleigh beam on `(L0, L)`.
//!
//! The crate discretizes the system with C1 Hermite beam elements and linear
//! heat elements, integrates it with an energy-exact implicit midpoint rule,
//! and inspects the spectrum and imaginary-axis resolvent of the discrete
//! generator.

pub mod analysis;
pub mod error;
pub mod fem;
pub mod generator;
pub mod io;
pub mod model;
pub mod spectral;
pub mod timestepper;

pub use error::{Error, Result};
pub use fem::{assemble, BcMode, DofMap, Mesh, SystemMatrices};
pub use generator::{build_generator, Generator, StateVector};
pub use model::{classify_regime, rayleigh_dispersion, InitialData, PhysicalParams, RegimeClass, RegimeTag};
pub use timestepper::{project_initial, simulate, step_cn, EnergyTrace};
