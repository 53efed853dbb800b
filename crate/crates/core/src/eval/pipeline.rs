// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{compute_metrics, pca2d, silhouette, EvalError, Metrics, Pca2D};
use crate::augment::{make_dataset_budgeted, DatasetConfig, Role, Sample, SampleSet};
use crate::encoder::{train_encoder, EncoderModel, EpochLoss, GraphInput, SslHyper, TrainSet};
use crate::graph::build_graph;
use crate::nas::{
    build_supernet, finetune, prune, shapley_estimate, train_supernet, Labeled, NasEpoch, NasHyper, PrunePolicy, ShapleyReport,
    SubNet, SuperNet,
};
use crate::netlist::Netlist;
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Share of each anchor's variants used for training.
    pub train_fraction: f64,
    pub dataset: DatasetConfig,
    pub ssl: SslHyper,
    pub nas: NasHyper,
    pub n_permutations: usize,
    pub tau: f64,
    /// Epochs of training given to the pruned SubNet on the training
    /// embeddings; 0 keeps the inherited weights as they are.
    pub retrain_epochs: usize,
    /// Epochs and Adam step size when adapting the SubNet to a new family.
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_pos: 40,
            n_neg: 40,
            train_fraction: 0.6,
            dataset: DatasetConfig::default(),
            ssl: SslHyper::default(),
            nas: NasHyper::default(),
            n_permutations: 128,
            tau: 0.0,
            retrain_epochs: 20,
            finetune_epochs: 7,
            finetune_lr: 1e-3,
        }
    }
}

/// Stage seeds, all derived from the run seed.
pub mod seeds {
    pub const DATASET: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const ENCODER: u64 = 3;
    pub const NAS_TRAIN: u64 = 4;
    pub const NAS_INIT: u64 = 5;
    pub const SHAPLEY: u64 = 6;
    pub const UNSEEN: u64 = 7;
}

/// Sample indices of a train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub const CSV_HEADER: &'static str = "sample_id,split";

    pub fn to_csv(&self, set: &SampleSet) -> String {
        let mut tag = vec![""; set.samples.len()];
        self.train.iter().for_each(|&i| tag[i] = "train");
        self.test.iter().for_each(|&i| tag[i] = "test");
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for (sample, t) in set.samples.iter().zip(tag) {
            s.push_str(&format!("{},{}\n", sample.id, t));
        }
        s
    }

    pub fn from_csv(text: &str, set: &SampleSet) -> Result<Self, EvalError> {
        let index: BTreeMap<&str, usize> = set.samples.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
        let mut split = Split {
            train: Vec::new(),
            test: Vec::new(),
        };
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let (id, tag) = line
                .split_once(',')
                .ok_or_else(|| EvalError::Degenerate(format!("bad split line `{line}`")))?;
            let &i = index
                .get(id)
                .ok_or_else(|| EvalError::Degenerate(format!("split names unknown sample `{id}`")))?;
            match tag.trim() {
                "train" => split.train.push(i),
                "test" => split.test.push(i),
                t => return Err(EvalError::Degenerate(format!("unknown split tag `{t}`"))),
            }
        }
        split.train.sort_unstable();
        split.test.sort_unstable();
        Ok(split)
    }
}

/// Per anchor: the anchor trains, and positives and negatives are each
/// shuffled and cut at `train_fraction` (rounded).
pub fn split_samples(set: &SampleSet, train_fraction: f64, seed: u64) -> Split {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for origin in 0..set.anchors.len() {
        let mut rng = SplitMix64::new(derive_seed(seed, origin as u64));
        for role in [Role::Anchor, Role::Positive, Role::Negative] {
            let mut idx: Vec<usize> = set
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.origin == origin && s.role == role)
                .map(|(i, _)| i)
                .collect();
            if role == Role::Anchor {
                train.extend(idx);
                continue;
            }
            rng.shuffle(&mut idx);
            let k = (train_fraction * idx.len() as f64).round() as usize;
            train.extend_from_slice(&idx[..k]);
            test.extend_from_slice(&idx[k..]);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// Embeddings of a training subset at one epoch, with their 2-D projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub epoch: usize,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub roles: Vec<Role>,
    pub embeddings: Vec<Vec<f64>>,
    pub pca: Pca2D,
    pub silhouette: f64,
}

impl Snapshot {
    pub const CSV_HEADER: &'static str = "sample_id,label,role,x,y";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for i in 0..self.ids.len() {
            let [x, y] = self.pca.coords[i];
            s.push_str(&format!("{},{},{},{},{}\n", self.ids[i], self.labels[i], self.roles[i].as_str(), x, y));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct EncoderRun {
    pub model: EncoderModel,
    pub history: Vec<EpochLoss>,
    pub snapshots: Vec<Snapshot>,
}

/// Trains the encoder on `samples` and records a snapshot at each epoch in
/// `capture` that falls within the budget.
pub fn train_with_snapshots(samples: &[&Sample], hyper: &SslHyper, capture: &[usize]) -> Result<EncoderRun, EvalError> {
    let set = TrainSet::from_samples(samples)?;
    let mut raw: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    let mut failure = None;
    let (model, history) = train_encoder(&set, hyper, |epoch, m| {
        if capture.contains(&epoch) && failure.is_none() {
            match embed_inputs(m, &set.graphs) {
                Ok(e) => raw.push((epoch, e)),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut snapshots = Vec::with_capacity(raw.len());
    for (epoch, embeddings) in raw {
        snapshots.push(Snapshot {
            epoch,
            ids: samples.iter().map(|s| s.id.clone()).collect(),
            labels: set.labels.clone(),
            roles: samples.iter().map(|s| s.role).collect(),
            pca: pca2d(&embeddings)?,
            silhouette: silhouette(&embeddings, &set.labels)?,
            embeddings,
        });
    }
    Ok(EncoderRun {
        model,
        history,
        snapshots,
    })
}

fn embed_inputs(model: &EncoderModel, graphs: &[GraphInput]) -> Result<Vec<Vec<f64>>, EvalError> {
    Ok(graphs.par_iter().map(|g| model.embed(g)).collect::<Result<Vec<_>, _>>()?)
}

pub fn embed_netlists(model: &EncoderModel, netlists: &[&Netlist]) -> Result<Vec<Vec<f64>>, EvalError> {
    Ok(netlists
        .par_iter()
        .map(|n| model.embed(&GraphInput::new(&build_graph(n))))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn embed_samples(model: &EncoderModel, samples: &[Sample]) -> Result<Vec<Vec<f64>>, EvalError> {
    let refs: Vec<&Netlist> = samples.iter().map(|s| &s.netlist).collect();
    embed_netlists(model, &refs)
}

pub fn labeled(embeddings: &[Vec<f64>], labels: &[usize], idx: &[usize]) -> Vec<Labeled> {
    idx.iter().map(|&i| (embeddings[i].clone(), labels[i])).collect()
}

pub fn predict(sub: &SubNet, data: &[Labeled]) -> Result<Metrics, EvalError> {
    let mut pred = Vec::with_capacity(data.len());
    for (z, _) in data {
        pred.push(sub.classify(z)?.0);
    }
    let labels: Vec<usize> = data.iter().map(|d| d.1).collect();
    compute_metrics(&pred, &labels)
}

/// SuperNet training, Shapley attribution on the training embeddings,
/// pruning at `tau` and retraining of the pruned SubNet.
#[derive(Debug, Clone)]
pub struct ClassifierRun {
    pub supernet: SuperNet,
    pub history: Vec<NasEpoch>,
    pub shapley: ShapleyReport,
    /// Pruned SubNet with the SuperNet's weights.
    pub pruned: SubNet,
    /// `pruned` after `retrain_epochs` of training.
    pub subnet: SubNet,
}

pub fn classifier_stage(train: &[Labeled], cfg: &PipelineConfig) -> Result<ClassifierRun, EvalError> {
    let dz = train.first().ok_or(EvalError::Empty)?.0.len();
    let mut supernet = build_supernet(dz, derive_seed(cfg.seed, seeds::NAS_INIT))?;
    let hyper = NasHyper {
        seed: derive_seed(cfg.seed, seeds::NAS_TRAIN),
        ..cfg.nas
    };
    let history = train_supernet(&mut supernet, train, &[], &hyper)?;
    let shapley = shapley_estimate(&supernet, train, cfg.n_permutations, derive_seed(cfg.seed, seeds::SHAPLEY))?;
    let pruned = prune(&supernet, &shapley, PrunePolicy::Threshold(cfg.tau))?;
    let subnet = if cfg.retrain_epochs > 0 {
        finetune(&pruned, train, &[], cfg.retrain_epochs, &hyper)?.0
    } else {
        pruned.clone()
    };
    Ok(ClassifierRun {
        supernet,
        history,
        shapley,
        pruned,
        subnet,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub dataset: SampleSet,
    pub split: Split,
    pub encoder: EncoderRun,
    /// One per sample, in dataset order.
    pub embeddings: Vec<Vec<f64>>,
    pub classifier: ClassifierRun,
    /// Held-out metrics of the full SuperNet, of the pruned SubNet before
    /// retraining, and of the final SubNet.
    pub full: Metrics,
    pub pruned_raw: Metrics,
    pub pruned: Metrics,
}

impl PipelineOutcome {
    pub fn silhouette_at(&self, epoch: usize) -> Option<f64> {
        self.encoder.snapshots.iter().find(|s| s.epoch == epoch).map(|s| s.silhouette)
    }
}

pub fn run_pipeline(corpus: &[Netlist], cfg: &PipelineConfig) -> Result<PipelineOutcome, EvalError> {
    let dataset = make_dataset_budgeted(corpus, cfg.n_pos, cfg.n_neg, derive_seed(cfg.seed, seeds::DATASET), &cfg.dataset)?;
    run_on_dataset(dataset, cfg)
}

/// Everything after dataset generation.
pub fn run_on_dataset(dataset: SampleSet, cfg: &PipelineConfig) -> Result<PipelineOutcome, EvalError> {
    let split = split_samples(&dataset, cfg.train_fraction, derive_seed(cfg.seed, seeds::SPLIT));
    let train_samples: Vec<&Sample> = split.train.iter().map(|&i| &dataset.samples[i]).collect();
    let ssl = SslHyper {
        seed: derive_seed(cfg.seed, seeds::ENCODER),
        ..cfg.ssl
    };
    let encoder = train_with_snapshots(&train_samples, &ssl, &[0, ssl.epochs])?;
    let embeddings = embed_samples(&encoder.model, &dataset.samples)?;
    let labels = dataset.labels();
    let train = labeled(&embeddings, &labels, &split.train);
    let test = labeled(&embeddings, &labels, &split.test);
    let classifier = classifier_stage(&train, cfg)?;
    let full_sub = SubNet::from_parts(classifier.supernet.clone(), PrunePolicy::Threshold(f64::NEG_INFINITY), 0, 0);
    let full = predict(&full_sub, &test)?;
    let pruned_raw = predict(&classifier.pruned, &test)?;
    let pruned = predict(&classifier.subnet, &test)?;
    Ok(PipelineOutcome {
        dataset,
        split,
        encoder,
        embeddings,
        classifier,
        full,
        pruned_raw,
        pruned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::desk_corpus;

    #[test]
    fn split_is_stratified_and_deterministic() {
        let corpus: Vec<Netlist> = desk_corpus(0).into_iter().skip(1).take(2).collect();
        let set = make_dataset_budgeted(&corpus, 10, 10, 3, &DatasetConfig::default()).unwrap();
        let s = split_samples(&set, 0.6, 1);
        assert_eq!(s, split_samples(&set, 0.6, 1));
        assert_eq!(s.train.len() + s.test.len(), set.samples.len());
        for origin in 0..2 {
            let count = |idx: &[usize], role: Role| idx.iter().filter(|&&i| set.samples[i].origin == origin && set.samples[i].role == role).count();
            assert_eq!(count(&s.train, Role::Anchor), 1);
            assert_eq!(count(&s.test, Role::Anchor), 0);
            assert_eq!(count(&s.train, Role::Positive), 3);
            assert_eq!(count(&s.test, Role::Positive), 2);
            assert_eq!(count(&s.train, Role::Negative), 3);
        }
        assert_eq!(Split::from_csv(&s.to_csv(&set), &set).unwrap(), s);
    }
}
