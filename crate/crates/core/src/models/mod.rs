//! Event autoencoder, frozen-encoder classifier, training and weight files.

mod build;
mod config;
mod infer;
mod network;
mod params;
mod train;
mod weights;

pub use build::{build_autoencoder, build_classifier};
pub use config::{LossKind, ModelConfig};
pub use infer::{
    classify, decode, encode, frame_tensor, predict, predict_batch, reconstruct, reconstruction_accuracy,
    Reconstructor,
};
pub use params::{expected_shapes, ModelKind, Param, ParameterSet};
pub use train::{train_autoencoder, train_autoencoder_with, train_classifier, EpochEnd, TrainOptions, TrainReport};
pub use weights::{load_weights, load_weights_for, save_weights, weights_from_bytes, weights_to_bytes, WEIGHTS_MAGIC, WEIGHTS_VERSION};

pub(crate) use infer::batch_tensor;
pub(crate) use network::Plan;
