//! A small dense-network engine: fully-connected layers with hand-written
//! reverse-mode gradients, MSE loss, Adam and parameter/FLOP accounting.
//!
//! Batches are row-major `(batch, features)` matrices throughout.

mod adam;
pub mod checkpoint;
mod dense;
mod loss;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, DenseLayer, Mlp, MlpCache};
pub use loss::mse_loss;
