// SPDX-License-Identifier: Apache-2.0

//! Sample generation for contrastive training: equivalence-preserving
//! variants (positives) and Trojan-injected variants (negatives).

mod dataset;
mod demorgan;
mod extract;
mod relocate;
mod trojan;

pub use dataset::{
    make_dataset, make_dataset_budgeted, DatasetConfig, Role, Sample, SampleSet, TransformKind, MANIFEST_HEADER,
};
pub use demorgan::{demorgan_rewrite, demorgan_rewrite_at, is_rewritable};
pub use extract::extract_subcircuit;
pub use relocate::{relocate, relocate_with, Relocation};
pub use trojan::{
    build_trojan, fan_in_cone, inject_trojan, trigger_fire_rate, PayloadBranch, TrojanConfig, TrojanInfo, TrojanPlan,
};

use thiserror::Error;

use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("rewrite count must be at least 1")]
    ZeroCount,
    #[error("no rewritable gate in `{0}`")]
    NoRewritableGate(String),
    #[error("gate index {0} cannot be rewritten")]
    NotRewritable(usize),
    #[error("`{0}` has no combinational gate to extract from")]
    NoGates(String),
    #[error("max_nodes must be at least 3, got {0}")]
    MaxNodesTooSmall(usize),
    #[error("trigger width must lie in [2, 6], got {0}")]
    TriggerWidth(usize),
    #[error("need {need} rare nets below the rarity threshold, found {found}")]
    NotEnoughRareNets { need: usize, found: usize },
    #[error("no trigger/victim pair with an observable effect after {0} attempts")]
    NoObservableVictim(usize),
    #[error("invalid Trojan plan: {0}")]
    BadPlan(String),
    #[error("dataset counts must be at least 1")]
    ZeroSamples,
    #[error("anchor name `{0}` is used twice")]
    DuplicateAnchor(String),
    #[error("dataset directory: {0}")]
    Io(String),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("certification failed for {sample}: {reason}")]
    Certification { sample: String, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}
