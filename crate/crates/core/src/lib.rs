//! Simulation of MIMO channel capacity when atmospheric molecules absorb
//! and re-radiate mmWave/terahertz signals.
//!
//! The crate is layered bottom-up:
//!
//! - [`spectra`]: per-species absorption tables and the medium coefficient
//!   `k(f)` of a gas mixture.
//! - [`linkbudget`]: free-space and molecular attenuation, received and
//!   re-radiated power, molecular noise, Rician K-factor.
//! - [`geometry`]: uniform square arrays with random orientation.
//! - [`channel`]: complex channel matrices, with re-radiation treated either
//!   as noise or as scattering.
//! - [`mimo`]: SVD capacity engine and precoding schemes.
//! - [`bounds`]: analytical Rician capacity bounds and limits.
//! - [`experiments`]: Monte-Carlo points, sweeps and singular-value
//!   histograms.
//! - [`cli`]: config parsing, CSV/manifest output and subcommand dispatch.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linkbudget;
pub mod mimo;
pub mod rng;
pub mod spectra;
pub mod stats;

pub use error::Error;

/// Complex scalar used for all channel coefficients.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
