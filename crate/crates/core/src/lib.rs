//! Laser-diode rate-equation simulation and flatness-based pre-compensation
//! of the drive current.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`]: time constants, physical scales and normalization.
//! - [`model`]: normalized rate equations and a fixed-step RK4 integrator.
//! - [`flatness`]: target waveforms with exact derivatives and the flat
//!   inversion producing the drive current.
//! - [`quasiharmonic`]: the degree-2 polynomial approximation of the
//!   inversion for quasi-harmonic targets.
//! - [`experiments`]: scenario runs, tracking and distortion metrics,
//!   parameter sweeps.
//! - [`config`] and [`cli`]: the command-line front end.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod flatness;
pub mod model;
pub mod params;
pub mod quasiharmonic;
pub mod selftest;

/// Full-precision (17 significant digits) locale-independent float text.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}
