// SPDX-License-Identifier: Apache-2.0

//! Flat TOML configuration. Every key is optional; missing keys take the
//! defaults below. The README lists every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sand_core::augment::DatasetConfig;
use sand_core::encoder::SslHyper;
use sand_core::eval::PipelineConfig;
use sand_core::nas::NasHyper;
use sand_core::tensor::AdamConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    /// Seed of the built-in synthetic corpora.
    pub corpus_seed: u64,
    /// Directory of anchor `.bench` files; empty selects the built-in desk corpus.
    pub bench_dir: String,
    /// Held-out family for the adaptability experiment; empty selects the
    /// built-in sequential corpus.
    pub unseen_dir: String,
    pub dataset_dir: String,
    pub model_dir: String,
    pub out_dir: String,

    pub n_pos: usize,
    pub n_neg: usize,
    pub trigger_width: usize,
    pub rarity_threshold: f64,
    pub max_fire_rate: f64,
    pub demorgan_max: usize,
    pub train_fraction: f64,

    pub ssl_epochs: usize,
    pub margin: f64,
    pub lambda_p: f64,
    pub lambda_n: f64,
    pub lambda_g: f64,
    pub ssl_lr: f64,
    pub batch_groups: usize,
    pub proj_scale: f64,

    pub nas_epochs: usize,
    pub nas_lr: f64,
    pub nas_batch_size: usize,
    pub cell_dropout: f64,
    pub n_permutations: usize,
    pub tau: f64,
    pub retrain_epochs: usize,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub trials: usize,
}

impl Default for Config {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            seed: p.seed,
            corpus_seed: 0,
            bench_dir: String::new(),
            unseen_dir: String::new(),
            dataset_dir: "out/dataset".into(),
            model_dir: "out/model".into(),
            out_dir: "out/experiments".into(),
            n_pos: p.n_pos,
            n_neg: p.n_neg,
            trigger_width: p.dataset.trigger_width,
            rarity_threshold: p.dataset.trojan.rarity_threshold,
            max_fire_rate: p.dataset.trojan.max_fire_rate,
            demorgan_max: p.dataset.demorgan_max,
            train_fraction: p.train_fraction,
            ssl_epochs: p.ssl.epochs,
            margin: p.ssl.margin,
            lambda_p: p.ssl.lambda[0],
            lambda_n: p.ssl.lambda[1],
            lambda_g: p.ssl.lambda[2],
            ssl_lr: p.ssl.adam.lr,
            batch_groups: p.ssl.batch_groups,
            proj_scale: p.ssl.proj_scale,
            nas_epochs: p.nas.epochs,
            nas_lr: p.nas.adam.lr,
            nas_batch_size: p.nas.batch_size,
            cell_dropout: p.nas.cell_dropout,
            n_permutations: p.n_permutations,
            tau: p.tau,
            retrain_epochs: p.retrain_epochs,
            finetune_epochs: p.finetune_epochs,
            finetune_lr: p.finetune_lr,
            trials: 20,
        }
    }
}

fn check(ok: bool, field: &str, rule: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field} must be {rule}")))
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => Config::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|_| CliError::MissingArtifact(p.to_path_buf()))?;
                toml::from_str(&text).map_err(|e| CliError::Config(one_line(&e.to_string())))?
            }
        };
        Ok(cfg)
    }

    /// Applies `key=value` overrides; values use TOML syntax (strings may be bare).
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), CliError> {
        if sets.is_empty() {
            return Ok(());
        }
        let mut table: toml::Table = toml::from_str(&self.to_toml()).expect("config serializes");
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{s}` is not key=value")))?;
            let k = k.trim();
            if !table.contains_key(k) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
            let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {v}")) {
                Ok(mut t) => t.remove("v").expect("key present"),
                Err(_) => toml::Value::String(v.to_string()),
            };
            table.insert(k.to_string(), parsed);
        }
        *self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(one_line(&e.to_string())))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check(self.n_pos >= 1, "n_pos", "≥ 1")?;
        check(self.n_neg >= 1, "n_neg", "≥ 1")?;
        check((1..=16).contains(&self.trigger_width), "trigger_width", "in 1..=16")?;
        check(self.rarity_threshold > 0.0 && self.rarity_threshold <= 0.5, "rarity_threshold", "in (0, 0.5]")?;
        check(self.max_fire_rate > 0.0 && self.max_fire_rate <= 1.0, "max_fire_rate", "in (0, 1]")?;
        check(self.demorgan_max >= 1, "demorgan_max", "≥ 1")?;
        check(self.train_fraction > 0.0 && self.train_fraction < 1.0, "train_fraction", "in (0, 1)")?;
        check(self.margin > 0.0, "margin", "> 0")?;
        for (name, v) in [("lambda_p", self.lambda_p), ("lambda_n", self.lambda_n), ("lambda_g", self.lambda_g)] {
            check(v >= 0.0 && v.is_finite(), name, "a finite value ≥ 0")?;
        }
        check(self.ssl_lr > 0.0, "ssl_lr", "> 0")?;
        check(self.batch_groups >= 1, "batch_groups", "≥ 1")?;
        check(self.proj_scale > 0.0, "proj_scale", "> 0")?;
        check(self.nas_lr > 0.0, "nas_lr", "> 0")?;
        check(self.nas_batch_size >= 1, "nas_batch_size", "≥ 1")?;
        check((0.0..1.0).contains(&self.cell_dropout), "cell_dropout", "in [0, 1)")?;
        check(self.n_permutations >= 1, "n_permutations", "≥ 1")?;
        check(!self.tau.is_nan(), "tau", "a number")?;
        check(self.finetune_epochs >= 1, "finetune_epochs", "≥ 1")?;
        check(self.finetune_lr > 0.0, "finetune_lr", "> 0")?;
        check(self.trials >= 2, "trials", "≥ 2")?;
        for (name, dir) in [("bench_dir", &self.bench_dir), ("unseen_dir", &self.unseen_dir)] {
            check(dir.is_empty() || Path::new(dir).is_dir(), name, "an existing directory or empty")?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn dataset_dir(&self) -> PathBuf {
        PathBuf::from(&self.dataset_dir)
    }

    pub fn model_dir(&self) -> PathBuf {
        PathBuf::from(&self.model_dir)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.out_dir)
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let mut d = DatasetConfig {
            demorgan_max: self.demorgan_max,
            trigger_width: self.trigger_width,
            ..DatasetConfig::default()
        };
        d.trojan.rarity_threshold = self.rarity_threshold;
        d.trojan.max_fire_rate = self.max_fire_rate;
        d
    }

    pub fn ssl(&self) -> SslHyper {
        SslHyper {
            margin: self.margin,
            lambda: [self.lambda_p, self.lambda_n, self.lambda_g],
            epochs: self.ssl_epochs,
            batch_groups: self.batch_groups,
            adam: AdamConfig {
                lr: self.ssl_lr,
                ..AdamConfig::default()
            },
            proj_scale: self.proj_scale,
            ..SslHyper::default()
        }
    }

    pub fn nas(&self) -> NasHyper {
        NasHyper {
            epochs: self.nas_epochs,
            batch_size: self.nas_batch_size,
            adam: AdamConfig {
                lr: self.nas_lr,
                ..AdamConfig::default()
            },
            cell_dropout: self.cell_dropout,
            ..NasHyper::default()
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed,
            n_pos: self.n_pos,
            n_neg: self.n_neg,
            train_fraction: self.train_fraction,
            dataset: self.dataset_config(),
            ssl: self.ssl(),
            nas: self.nas(),
            n_permutations: self.n_permutations,
            tau: self.tau,
            retrain_epochs: self.retrain_epochs,
            finetune_epochs: self.finetune_epochs,
            finetune_lr: self.finetune_lr,
        }
    }
}

pub(crate) fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
