//! Simulation and analysis toolkit for Duffing resonators whose cubic
//! nonlinearity comes from a short-range bond potential.
//!
//! The crate is organised by subsystem:
//!
//! * [`potential`]: power-law bond potentials with exact derivatives and a
//!   damped least-squares fitter.
//! * [`tuning`]: static equilibrium of a beam coupled to the bond, the
//!   stiffness / Duffing-constant tuning curve, and the inverse estimator
//!   that recovers the Duffing constant from a measured stiffness curve.
//! * [`duffing`]: steady-state amplitude response, bifurcation onset,
//!   hysteresis sweeps and the threshold-versus-mass curve.
//! * [`sde`]: stochastic integrators for the full coordinate and for the
//!   slow rotating-frame quadratures.
//! * [`analysis`]: demodulation, Welch spectra, two-state detection, SNR and
//!   the stochastic-resonance inversion for the total force noise.
//! * [`noisebudget`]: force-noise budget arithmetic.
//!
//! All quantities are SI. Power spectral densities are one-sided
//! (`f >= 0`, integral equals the variance) everywhere in the crate.

pub mod analysis;
pub mod csvio;
pub mod duffing;
mod error;
pub mod noisebudget;
pub mod potential;
pub mod sde;
pub mod tuning;

pub use analysis::{SpectrumResult, TelegraphResult, WindowKind};
pub use duffing::{ResonatorParams, SweepBranch, SweepDirection};
pub use error::{Error, Result};
pub use noisebudget::{NoiseSource, Provenance};
pub use potential::{PotentialModel, PowerLawTerm};
pub use sde::{DriveSpec, NoiseSpec, TrajectoryKind, TrajectorySeries};
pub use tuning::{BeamAnchor, TunePoint};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
