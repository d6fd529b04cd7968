//! Simulation of a tripartite Mermin test on three qubits in a driven cavity.
//!
//! The pipeline has three stages:
//!
//! 1. [`ghz_prep`]: one-step GHZ preparation under a strongly driven,
//!    off-resonant cavity, with a closed-form propagator and a brute-force
//!    truncated-Fock evolution to check it against.
//! 2. [`spectroscopy`]: spectral joint measurement of the three qubits from the
//!    steady-state transmission of a dispersively coupled, driven cavity.
//! 3. [`experiment`]: local-angle encoding, parity correlators and the
//!    Mermin `Q` parameter, evaluated both exactly and from simulated spectra.
//!
//! [`qubits`] holds the three-qubit state algebra and [`numerics`] the dense
//! complex linear algebra everything else is built on. Batch work (spectrum
//! sweeps, correlator acquisition) is dispatched through [`exec::Execution`],
//! which uses rayon when the `parallel` feature is on.
//!
//! Units: all frequencies are angular, in rad/µs, and all times in µs.
//! `2π × 1 MHz` is therefore `TAU` rad/µs.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod experiment;
pub mod ghz_prep;
pub mod numerics;
pub mod qubits;
pub mod spectroscopy;

pub use error::{Error, Result};
pub use exec::Execution;

/// Converts a linear frequency in MHz to an angular frequency in rad/µs.
#[inline]
pub fn mhz_to_angular(mhz: f64) -> f64 {
    std::f64::consts::TAU * mhz
}

/// Converts an angular frequency in rad/µs to a linear frequency in MHz.
#[inline]
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / std::f64::consts::TAU
}
