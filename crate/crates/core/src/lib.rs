//! Narrowband biphoton generation by spontaneous four-wave mixing in an EIT medium.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece of the
//! toolkit:
//!
//! - [`model`]: susceptibilities, spectral amplitude, decoherence law, phase mismatch.
//! - [`wavepacket`]: FFT evaluation of the two-photon correlation `G2(tau)`,
//!   closed-form width/rate approximations and regime diagnostics.
//! - [`sim`]: detector-chain Monte Carlo producing time tags and start-stop histograms.
//! - [`analysis`]: smoothing, baseline, SBR, correlation metrics, brightness.
//! - [`fit`]: deterministic simplex fitting of the model to histograms.
//!
//! All rates (detunings, Rabi frequencies, decoherence) are dimensionless in units
//! of the excited-state decay rate `Gamma`; `Gamma` itself (rad/s) only enters when
//! converting to seconds or Hz.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN takes the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
mod error;
pub mod fft;
pub mod fit;
pub(crate) mod math;
pub mod model;
pub mod signal;
pub mod sim;
pub mod wavepacket;

pub use error::{Error, GridCheck, Result};
pub use model::{
    BeamGeometry, Complex, DecoherenceModel, DriveParams, MediumParams, PhysicalConstants,
};
