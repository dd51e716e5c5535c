//! A small feed-forward regression network written from scratch.
//!
//! The network maps a handful of real-valued features to one real output
//! through a chain of affine layers with ReLU activations and a linear head.
//! Training minimizes the mean squared error with Adam. Models round-trip
//! through a compact little-endian checkpoint format (see [`checkpoint`]).

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod normalize;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use mlp::{Dense, Gradients, Mlp, HIDDEN_WIDTHS};
pub use normalize::Normalizer;
pub use train::{train, EpochStats, Estimator, Samples, TrainConfig, TrainedModel};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error("non-finite loss at epoch {epoch}; history so far: {history:?}")]
    NonFiniteLoss { epoch: usize, history: Vec<EpochStats> },

    #[error("normalizer has not been fitted for {0} features")]
    UnfittedNormalizer(usize),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
