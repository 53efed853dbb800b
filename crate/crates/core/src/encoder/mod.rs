// SPDX-License-Identifier: Apache-2.0

//! Three-layer GCN encoder with sum-pool readout and tanh projection,
//! trained with a hybrid contrastive loss (anchor/positive attraction,
//! margin-hinged anchor/negative repulsion, pull toward class centroids).

mod loss;
mod model;
mod train;

pub use loss::{centroids, loss_global, loss_negative, loss_positive, sq_dist};
pub use model::{embed, EncoderDims, EncoderModel, GraphInput, Trace, PARAM_NAMES};
pub use train::{
    batch_objective, train_encoder, EpochLoss, Group, LossParts, SslHyper, TrainSet,
};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error(transparent)]
    Shape(#[from] TensorError),
    #[error("graph feature width {got} does not match the model's {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("embedding list is empty")]
    EmptyList,
    #[error("embedding lengths differ ({0} vs {1})")]
    Length(usize, usize),
    #[error("margin must be positive, got {0}")]
    Margin(f64),
    #[error("class {0} has no members")]
    ClassAbsent(usize),
    #[error("label {0} has no centroid")]
    NoCentroid(usize),
    #[error("degenerate training set: {0}")]
    Degenerate(String),
}
