// SPDX-License-Identifier: Apache-2.0

//! Self-supervised hardware Trojan detection on gate-level netlists.
//!
//! The pipeline runs bottom-up through these modules:
//!
//! - [`netlist`]: the `.bench` circuit model, parser and writer
//! - [`sim`]: bit-parallel logic simulation, equivalence checks, signal profiles
//! - [`augment`]: equivalence-preserving rewrites and Trojan injection, dataset assembly
//! - [`graph`]: netlist → graph with node features and normalized adjacency
//! - [`tensor`]: dense kernel with explicit backward rules, Adam, gradient checking
//! - [`encoder`]: three-layer GCN encoder trained with the hybrid contrastive loss
//! - [`nas`]: SuperNet classifier, Shapley-value cell attribution and pruning
//! - [`eval`]: metrics, PCA, silhouette and the experiment runners

pub mod augment;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod graph;
pub mod nas;
pub mod netlist;
pub mod rng;
pub mod sim;
pub mod tensor;

pub use augment::{Sample, SampleSet};
pub use encoder::{EncoderDims, EncoderModel, SslHyper};
pub use eval::{Metrics, PipelineConfig};
pub use nas::{NasHyper, SubNet, SuperNet};
pub use netlist::{Gate, GateKind, Netlist};
pub use tensor::{AdamConfig, Matrix, Param};
