// SPDX-License-Identifier: Apache-2.0

//! Detection metrics, embedding diagnostics and the experiment runners
//! that chain dataset generation, encoder, SuperNet and pruning.

mod experiments;
mod metrics;
mod pca;
mod pipeline;
mod silhouette;

pub use experiments::{
    ablation_global_loss, adaptability_experiment, stability_trials, trial_seed, AblationReport, AdaptabilityReport,
    ArmResult, StabilityReport,
};
pub use metrics::{compute_metrics, Metrics};
pub use pca::{pca2d, Pca2D};
pub use pipeline::{
    classifier_stage, embed_netlists, embed_samples, labeled, predict, run_on_dataset, run_pipeline, seeds,
    split_samples, train_with_snapshots, ClassifierRun, EncoderRun, PipelineConfig, PipelineOutcome, Snapshot, Split,
};
pub use silhouette::silhouette;

use thiserror::Error;

use crate::augment::AugmentError;
use crate::encoder::EncoderError;
use crate::nas::NasError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("length mismatch ({0} vs {1})")]
    Length(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("{0}")]
    Degenerate(String),
    #[error("benchmark `{0}` appears in both the seen and unseen families")]
    Overlap(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Nas(#[from] NasError),
}
