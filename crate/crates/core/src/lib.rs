//! Event-vision toolkit: synthesize binary event frames from intensity
//! sequences, train a convolutional event autoencoder and a frozen-encoder
//! classifier, and evaluate reconstruction, ROC/AUROC, layer-wise mutual
//! information and inference throughput.
//!
//! Numerical code is generic over [`Scalar`]; the aliases below fix the
//! precisions used in practice (`f32` for training and inference, `f64` for
//! gradient checks) and the exact rational ROC used by oracles.

pub mod bench;
pub mod error;
pub mod event_frames;
pub mod fsutil;
pub mod metrics;
pub mod mi_probe;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod selector;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::{Fraction, Scalar};

/// Training / inference tensor.
pub type Tensor32 = tensor::Tensor<f32>;
/// Gradient-check tensor.
pub type Tensor64 = tensor::Tensor<f64>;
/// Weights as trained and stored.
pub type Params = models::ParameterSet<f32>;
/// Weights promoted to `f64` for gradient checks.
pub type Params64 = models::ParameterSet<f64>;
/// ROC curve with floating-point coordinates.
pub type Roc = metrics::RocCurve<f64>;
/// ROC curve with exact rational coordinates and area.
pub type ExactRoc = metrics::RocCurve<num_rational::Ratio<i64>>;
