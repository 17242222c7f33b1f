//! Command-line driver for the scattering toolkit.
//!
//! One TOML scene file describes an experiment — obstacle, potentials,
//! solver block, line-pencil dataset — and five commands consume it:
//!
//! - `validate` runs the scene-level invariants (geometry, flags,
//!   divergence, circulations, decay classes) and exits nonzero on any
//!   failure;
//! - `forward` writes the high-momenta phase table, the batch X-ray table,
//!   and the per-class flux records;
//! - `verify` runs the time-domain solver over the momentum ladder, fits
//!   the phase-error decay slope against the configured band, and checks
//!   that discretization error is subordinate;
//! - `invert` reconstructs `A₀` and the plane-normal field component from
//!   freshly generated phase data, recovers hole fluxes, the long-range
//!   flux, and the `A∞` sum, and writes an error summary against the
//!   scene's own ground truth;
//! - `export-plots` rewrites existing outputs as long-format series.
//!
//! The library half exists so tests can drive the exact command
//! implementations without spawning processes.

pub mod commands;
pub mod config;
