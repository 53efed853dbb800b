// SPDX-License-Identifier: Apache-2.0

//! Downstream classifier: a layered SuperNet of mixed cells trained on
//! graph embeddings, per-cell Shapley attribution over coalitions of cells,
//! and pruning to a fixed-mask SubNet.

mod cell;
mod prune;
mod shapley;
mod supernet;

pub use cell::{Cell, CellKind};
pub use prune::{finetune, prune, PrunePolicy, SubNet};
pub use shapley::{
    exact_shapley, monte_carlo_shapley, shapley_estimate, CoalitionGame, ShapleyEstimate, ShapleyReport,
    SuperNetGame, EXACT_SHAPLEY_LIMIT,
};
pub use supernet::{build_supernet, train_supernet, Labeled, NasEpoch, NasHyper, NasShape, NetGrads, SuperNet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NasError {
    #[error("input length {0} does not survive the pooling schedule")]
    InputTooShort(usize),
    #[error("layer {0} has no active cell")]
    NoActiveCell(usize),
    #[error("embedding length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("exact Shapley supports at most 12 players, got {0}")]
    TooManyPlayers(usize),
    #[error("at least one permutation is required")]
    ZeroPermutations,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("fine-tuning needs at least one epoch")]
    ZeroEpochs,
}
