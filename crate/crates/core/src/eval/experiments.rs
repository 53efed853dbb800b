// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use rayon::prelude::*;

use super::pipeline::{
    classifier_stage, embed_samples, labeled, predict, run_on_dataset, run_pipeline, seeds, split_samples,
    train_with_snapshots, PipelineConfig,
};
use super::EvalError;
use crate::augment::{make_dataset_budgeted, Sample};
use crate::encoder::SslHyper;
use crate::nas::{finetune, NasHyper};
use crate::tensor::AdamConfig;
use crate::netlist::Netlist;
use crate::rng::{derive_seed, derive_seed_str};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmResult {
    pub lambda3: f64,
    /// Silhouette of the training embeddings after the last epoch.
    pub silhouette: f64,
    /// Held-out accuracy of the pruned classifier.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    /// Hash of the shared dataset manifest.
    pub manifest_hash: u64,
    /// `[λ₃ as configured, λ₃ = 0]`.
    pub arms: [ArmResult; 2],
}

impl AblationReport {
    pub const CSV_HEADER: &'static str = "arm,lambda3,silhouette,accuracy";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for (name, a) in ["global", "no_global"].iter().zip(&self.arms) {
            s.push_str(&format!("{name},{},{},{}\n", a.lambda3, a.silhouette, a.accuracy));
        }
        s
    }
}

/// Trains both arms on one dataset with identical seeds; only λ₃ differs.
pub fn ablation_global_loss(corpus: &[Netlist], cfg: &PipelineConfig) -> Result<AblationReport, EvalError> {
    let dataset = make_dataset_budgeted(corpus, cfg.n_pos, cfg.n_neg, derive_seed(cfg.seed, seeds::DATASET), &cfg.dataset)?;
    let manifest_hash = derive_seed_str(0, &dataset.manifest_csv());
    let lambdas = [cfg.ssl.lambda[2], 0.0];
    let arms = lambdas
        .par_iter()
        .map(|&l3| {
            let mut c = cfg.clone();
            c.ssl.lambda[2] = l3;
            let out = run_on_dataset(dataset.clone(), &c)?;
            Ok(ArmResult {
                lambda3: l3,
                silhouette: out.silhouette_at(c.ssl.epochs).unwrap_or(f64::NAN),
                accuracy: out.pruned.accuracy,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(AblationReport {
        manifest_hash,
        arms: [arms[0], arms[1]],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub stddev: f64,
}

impl StabilityReport {
    pub const CSV_HEADER: &'static str = "trial,accuracy";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for (i, a) in self.accuracies.iter().enumerate() {
            s.push_str(&format!("{i},{a}\n"));
        }
        s
    }
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, 0x7000 + trial as u64)
}

/// Full pipeline per trial, each with its own seed for data and training.
pub fn stability_trials(corpus: &[Netlist], cfg: &PipelineConfig, n_trials: usize) -> Result<StabilityReport, EvalError> {
    if n_trials < 2 {
        return Err(EvalError::Degenerate("stability needs at least 2 trials".into()));
    }
    let accuracies = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let c = PipelineConfig {
                seed: trial_seed(cfg.seed, t),
                ..cfg.clone()
            };
            Ok(run_pipeline(corpus, &c)?.pruned.accuracy)
        })
        .collect::<Result<Vec<f64>, EvalError>>()?;
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(StabilityReport {
        accuracies,
        mean,
        stddev: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptabilityReport {
    pub seen_acc: f64,
    pub unseen_acc_pre: f64,
    pub unseen_acc_post: f64,
    /// `seen_acc − unseen_acc_post`.
    pub drop: f64,
    pub epochs: usize,
}

impl AdaptabilityReport {
    pub const CSV_HEADER: &'static str = "seen_acc,unseen_acc_pre,unseen_acc_post,drop,epochs";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.seen_acc, self.unseen_acc_pre, self.unseen_acc_post, self.drop, self.epochs
        )
    }
}

/// Trains everything on `seen`, then fine-tunes only the pruned classifier
/// on `unseen` with the encoder frozen. With `control` the unseen family is
/// the seen dataset itself.
pub fn adaptability_experiment(
    seen: &[Netlist],
    unseen: &[Netlist],
    cfg: &PipelineConfig,
    control: bool,
) -> Result<AdaptabilityReport, EvalError> {
    if cfg.finetune_epochs == 0 {
        return Err(EvalError::Degenerate("fine-tuning needs at least one epoch".into()));
    }
    if !control {
        let names: BTreeSet<&str> = seen.iter().map(|n| n.name.as_str()).collect();
        if let Some(n) = unseen.iter().find(|n| names.contains(n.name.as_str())) {
            return Err(EvalError::Overlap(n.name.clone()));
        }
    }
    let dataset = make_dataset_budgeted(seen, cfg.n_pos, cfg.n_neg, derive_seed(cfg.seed, seeds::DATASET), &cfg.dataset)?;
    let split = split_samples(&dataset, cfg.train_fraction, derive_seed(cfg.seed, seeds::SPLIT));
    let train_samples: Vec<&Sample> = split.train.iter().map(|&i| &dataset.samples[i]).collect();
    let ssl = SslHyper {
        seed: derive_seed(cfg.seed, seeds::ENCODER),
        ..cfg.ssl
    };
    let encoder = train_with_snapshots(&train_samples, &ssl, &[])?.model;
    let emb = embed_samples(&encoder, &dataset.samples)?;
    let labels = dataset.labels();
    let clf = classifier_stage(&labeled(&emb, &labels, &split.train), cfg)?;
    let seen_acc = predict(&clf.subnet, &labeled(&emb, &labels, &split.test))?.accuracy;

    let (u_train, u_test) = if control {
        (labeled(&emb, &labels, &split.train), labeled(&emb, &labels, &split.test))
    } else {
        let u_seed = derive_seed(cfg.seed, seeds::UNSEEN);
        let u_set = make_dataset_budgeted(unseen, cfg.n_pos, cfg.n_neg, derive_seed(u_seed, seeds::DATASET), &cfg.dataset)?;
        let u_split = split_samples(&u_set, cfg.train_fraction, derive_seed(u_seed, seeds::SPLIT));
        let u_emb = embed_samples(&encoder, &u_set.samples)?;
        let u_labels = u_set.labels();
        (
            labeled(&u_emb, &u_labels, &u_split.train),
            labeled(&u_emb, &u_labels, &u_split.test),
        )
    };
    let unseen_acc_pre = predict(&clf.subnet, &u_test)?.accuracy;
    let hyper = NasHyper {
        seed: derive_seed(cfg.seed, seeds::NAS_TRAIN),
        adam: AdamConfig {
            lr: cfg.finetune_lr,
            ..cfg.nas.adam
        },
        ..cfg.nas
    };
    let (tuned, _) = finetune(&clf.subnet, &u_train, &[], cfg.finetune_epochs, &hyper)?;
    let unseen_acc_post = predict(&tuned, &u_test)?.accuracy;
    Ok(AdaptabilityReport {
        seen_acc,
        unseen_acc_pre,
        unseen_acc_post,
        drop: seen_acc - unseen_acc_post,
        epochs: cfg.finetune_epochs,
    })
}
