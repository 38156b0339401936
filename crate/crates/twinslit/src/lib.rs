//! Virtual realization of the two-photon double-slit experiment.
//!
//! Two degenerate photons from type-I parametric down conversion cross a
//! double slit, one photon per slit, and are detected in coincidence behind
//! it. The crate provides three engines over a shared geometry:
//!
//! - [`sqm`]: the standard quantum-mechanical coincidence pattern
//!   `C(θ1, θ2)` built from sinc diffraction envelopes, including averaging
//!   over the finite detector lens apertures;
//! - [`wavefunction`] + [`bohmian`]: Fresnel propagation of the symmetrized
//!   two-photon wavefunction and integration of pilot-wave trajectory
//!   ensembles guided by it, with non-crossing diagnostics;
//! - [`experiment`] + [`stats`]: coincidence windows, delayed-window
//!   background, Poisson count simulation, background subtraction and
//!   significance, reproducing the counting protocol of the real experiment.
//!
//! See the crate examples for runnable entry points per capability and the
//! `twinslit` binary for the batch CLI.

pub mod bohmian;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod quad;
pub mod report;
pub mod sqm;
pub mod stats;
pub mod wavefunction;

pub use error::{Error, Result};
