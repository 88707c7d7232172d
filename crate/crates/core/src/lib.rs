//! Pulse-level emulator for a Rydberg atom chain tuned to the critical
//! transverse-field Ising point.
//!
//! The pipeline prepares the Ising ground state with an adiabatic sweep,
//! measures the retarded Green's function through a local Z rotation followed
//! by free evolution, Fourier transforms it to the dynamic structure factor,
//! and turns the spectrum into a quantum Fisher information entanglement
//! witness. Hardware noise is emulated by Monte Carlo trajectories and can be
//! mitigated with confusion-matrix inversion and randomized-measurement
//! calibration.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod greens;
pub mod io;
pub mod lattice;
pub mod mitigation;
pub mod noise;
pub mod operator;
pub mod pipeline;
pub mod pulse;
pub mod qfi;
pub mod spectral;
pub mod spectrum;
pub mod state;
pub mod state_prep;

pub use error::{Error, Result};
