//! Equilibrium coherences of the multi-level spin-boson model.
//!
//! The excited-state manifold of `N_S` coupled sites interacts linearly with a
//! harmonic bath. The crate computes the stationary coherence matrix in the
//! exciton basis by several routes:
//!
//! * [`classical`]: the equipartition state, free of coherences.
//! * [`semiclassical`]: action-angle states with quantized actions (dimers).
//! * [`perturbative`]: second-order imaginary-time expansion.
//! * [`hbar`]: order-hbar^3 Wigner expansion with classical bath moments.
//! * [`oracle`]: exact diagonalization on a discretized, Fock-truncated bath.
//!
//! [`phase_space`] evaluates the single-oscillator coherence `|1><0|` in
//! classical, semiclassical and Wigner form. [`config`] and [`run`] drive the
//! `mlsb` command-line tool.
//!
//! Units: hbar = 1, frequencies and energies in cm^-1, temperatures in kelvin.

pub mod classical;
pub mod config;
pub mod error;
pub mod hbar;
mod linalg;
pub mod model;
pub mod oracle;
pub mod perturbative;
pub mod phase_space;
pub mod quadrature;
pub mod run;
pub mod semiclassical;

pub use error::{Error, Result};
pub use model::{
    diagonalize_excited, reorganization_matrix, sigma0_and_partition, validate_regime, BathShape, BathSpec,
    CoherenceResult, ExcitonBasis, Method, RegimeWarning, SiteSystem, Thermo,
};
