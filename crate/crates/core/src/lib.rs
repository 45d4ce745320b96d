//! OFDM channel estimation with frequency-time division networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`]: 3GPP TDL power-delay profiles and sum-of-sinusoids fading.
//! * [`link`]: resource grid, pilot placement, noisy pilot reception and LS.
//! * [`dataset`]: mixed-scenario dataset construction and the `FTDS` file format.
//! * [`nn`]: a small dense-network engine (layers, backprop, MSE, Adam).
//! * [`estimators`]: FreqTimeNet, AttenFreqTimeNet and an interpolation baseline.
//! * [`train`]: training loop, per-SNR evaluation and reporting.

// Validation guards use `!(x >= lo)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod link;
pub mod nn;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
