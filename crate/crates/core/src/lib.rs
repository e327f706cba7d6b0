//! Simulation and estimation core for transabdominal fetal pulse oximetry.
//!
//! The crate is `no_std` (with `alloc`): everything here is pure computation
//! over in-memory values. File formats, the command line, and multi-threaded
//! drivers live in the companion `tfo` crate.
//!
//! Pipeline, bottom to top:
//!
//! - [`tissue`]: four-layer slab model and hemodynamics-driven absorption.
//! - [`transport`]: scattering-only Monte Carlo random walk that records the
//!   partial pathlength of every detected photon in every layer.
//! - [`replay`]: detector intensities for arbitrary absorption vectors,
//!   recomputed from stored pathlengths without re-simulation.
//! - [`features`]: pulsation ratios (EPR), ratio-of-ratios, curve smoothing.
//! - [`noise`]: photodiode shot/thermal noise and per-detector gain.
//! - [`dsp`]: frequency-multiplexed PPG synthesis and the demodulation,
//!   envelope, lock-in, and ratio extraction chain.
//! - [`mlp`]: a small batch-normalized MLP regressor with Adam training,
//!   early stopping, gradient checking, and cross-validation splits.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dsp;
pub mod error;
pub mod features;
pub mod mlp;
pub mod noise;
pub mod replay;
pub mod rng;
pub mod stats;
pub mod tissue;
pub mod transport;

pub use error::{Error, Result};
