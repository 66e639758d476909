//! Simulation of collimated blue light generated by four-wave mixing in warm
//! rubidium vapour.
//!
//! The crate is layered bottom-up:
//!
//! - [`atomic`]: level schemes, vapour density, Doppler widths.
//! - [`liouville`]: rotating-wave Bloch equations for one velocity class,
//!   their steady state and time evolution.
//! - [`spectra`]: Doppler averaging, excitation scans, Autler-Townes analysis
//!   and a Zeeman optical-pumping rate model.
//! - [`phase_match`]: planar wave-vector closure for the four-wave process.
//! - [`propagation`]: pump depletion, IR gain and four-wave coupling along
//!   the cell, with power, density and detuning curves.
//! - [`config`] and [`output`]: run configuration and CSV/JSON emission.

pub mod atomic;
pub mod config;
pub mod constants;
pub mod error;
pub mod liouville;
pub mod ode;
pub mod output;
pub mod phase_match;
pub mod propagation;
pub mod spectra;

pub use error::{Error, Result};
