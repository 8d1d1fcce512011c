//! Multimode N00N state correlation functions from numerical normal modes.
//!
//! The pipeline: discretise a dielectric map ([`grid`], [`operators`]), solve
//! for its normal modes ([`modes`]), expand Gaussian single-photon packets
//! over those modes ([`wavepackets`]), and evaluate N-fold coincidence
//! correlation functions of two-path N00N states ([`correlation`]), with a
//! brute-force Wick contraction oracle ([`wick`]) as ground truth. The
//! [`experiments`] drive the phase-sensing and ghost-imaging sweeps and
//! [`config`] / [`output`] handle configuration, CSV and manifests.
//!
//! Units: `c = 1` and `hbar = 1`. Lengths and times are in metres,
//! frequencies in rad/m.

pub mod config;
pub mod correlation;
pub mod experiments;
pub mod error;
pub mod grid;
pub mod modes;
pub mod operators;
pub mod output;
pub mod wavepackets;
pub mod wick;

pub use error::{Error, ErrorClass, Result};
