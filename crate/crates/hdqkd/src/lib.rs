//! Simulator and analysis toolkit for the BB84 quantum key distribution
//! protocol extended to 16-dimensional photonic states.
//!
//! Information is encoded in which-slit transverse momentum: a programmable
//! mask opens `D` slits and sets a per-slit phase, and the two bases of a
//! mutually unbiased pair need only 0/pi phase patterns. The crate covers the
//! whole pipeline:
//!
//! - [`hilbert`]: slit-basis states, phase masks, the built-in 16-dimensional
//!   MUB pair, and its exact integer verification;
//! - [`optics`]: the physical detection model (multi-slit Fraunhofer
//!   diffraction integrated over a pinhole);
//! - [`photonics`]: weak coherent pulses, threshold detection, dark counts,
//!   and empirical noise knobs;
//! - [`protocol`]: the clocked session engine, sifting, and error counting;
//! - [`security`]: attack thresholds, entropy, rates, and verdicts;
//! - [`config`] and [`wire`]: the operational shell, including the
//!   two-process reconciliation protocol over a framed byte stream.

pub mod config;
pub mod error;
pub mod hilbert;
mod mub_data;
pub mod optics;
pub mod photonics;
pub mod protocol;
pub mod rng;
pub mod security;
pub mod wire;

pub use error::{Error, Result};
