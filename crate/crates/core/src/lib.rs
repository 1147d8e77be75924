//! Lumped-element simulation of a piezoelectric vibration energy harvester,
//! comparing a diode-bridge ("standard") interface with synchronous electric
//! charge extraction (SECE).
//!
//! The insert is driven by a prescribed displacement ([`excitation`]); the
//! electrical side is integrated in the time domain ([`sim`]) and compared
//! against closed-form harmonic results ([`analytic`]). [`analysis`] turns
//! runs into load sweeps, spectra and gain reports, and [`scenario`] wires
//! everything to TOML scenario files.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod analytic;
pub mod error;
pub mod excitation;
pub mod lumped;
mod ode;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
