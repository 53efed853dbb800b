// SPDX-License-Identifier: Apache-2.0

//! `sand` command-line pipeline: dataset generation, encoder and classifier
//! training, detection and the evaluation experiments.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod models;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Classifier, Ctx};
use config::Config;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sand", version, about = "Hardware Trojan detection on gate-level netlists")]
pub struct Cli {
    /// TOML config; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub sets: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub dataset_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Overwrite artifacts written under a different config.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a .bench file and print its size.
    Parse { file: PathBuf },
    /// Check netlist invariants; exits 1 on any violation.
    Validate { file: PathBuf },
    /// Write a built-in synthetic corpus as .bench files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "desk")]
        family: String,
    },
    /// Generate anchors, positives and Trojaned negatives plus the train/test split.
    Dataset,
    /// Train the contrastive graph encoder on the training split.
    TrainEncoder,
    /// Embed every dataset sample with the trained encoder.
    Embed,
    /// Train the SuperNet on the training embeddings.
    TrainSupernet,
    /// Estimate per-cell Shapley values.
    Shap,
    /// Mask cells by Shapley value (threshold `tau`, or top-k per layer).
    Prune {
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Retrain the pruned SubNet; `--data` points at another embeddings CSV.
    Finetune {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Classify .bench files (or directories of them): `bench_path,label,score`.
    Detect {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "finetuned")]
        classifier: Classifier,
    },
    /// Held-out metrics of every stored classifier.
    Eval,
    /// End-to-end experiments; results land in `out_dir`.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Full pipeline: held-out metrics and embedding snapshots.
    Pipeline,
    /// Global-loss ablation on one shared dataset.
    Ablation,
    /// Repeated pipeline runs with independent seeds.
    Stability,
    /// Train on one family, fine-tune the SubNet on a held-out one.
    Adaptability {
        /// Reuse the seen family as the unseen one.
        #[arg(long)]
        control: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Validate { .. } => "validate",
            Command::Synth { .. } => "synth",
            Command::Dataset => "dataset",
            Command::TrainEncoder => "train-encoder",
            Command::Embed => "embed",
            Command::TrainSupernet => "train-supernet",
            Command::Shap => "shap",
            Command::Prune { .. } => "prune",
            Command::Finetune { .. } => "finetune",
            Command::Detect { .. } => "detect",
            Command::Eval => "eval",
            Command::Experiment { .. } => "experiment",
        }
    }
}

/// Config file, then `--set`, then the dedicated flags.
pub fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    cfg.apply_overrides(&cli.sets)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let path = |p: &PathBuf| p.to_string_lossy().into_owned();
    if let Some(p) = &cli.dataset_dir {
        cfg.dataset_dir = path(p);
    }
    if let Some(p) = &cli.model_dir {
        cfg.model_dir = path(p);
    }
    if let Some(p) = &cli.out_dir {
        cfg.out_dir = path(p);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Parse { file } => return commands::parse(file),
        Command::Validate { file } => return commands::validate_file(file),
        _ => {}
    }
    let ctx = Ctx::new(resolve_config(cli)?, cli.force, cli.command.name());
    match &cli.command {
        Command::Parse { .. } | Command::Validate { .. } => unreachable!("handled above"),
        Command::Synth { out, family } => {
            let written = commands::synth(&ctx.cfg, out, family)?;
            Ok(written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n"))
        }
        Command::Dataset => commands::dataset(&ctx),
        Command::TrainEncoder => commands::train_encoder(&ctx),
        Command::Embed => commands::embed(&ctx),
        Command::TrainSupernet => commands::train_supernet(&ctx),
        Command::Shap => commands::shap(&ctx),
        Command::Prune { top_k } => commands::prune_cmd(&ctx, *top_k),
        Command::Finetune { epochs, data } => commands::finetune_cmd(&ctx, *epochs, data.as_deref()),
        Command::Detect { inputs, classifier } => commands::detect(&ctx, inputs, *classifier),
        Command::Eval => commands::eval(&ctx),
        Command::Experiment { which } => match which {
            Experiment::Pipeline => commands::experiment_pipeline(&ctx),
            Experiment::Ablation => commands::experiment_ablation(&ctx),
            Experiment::Stability => commands::experiment_stability(&ctx),
            Experiment::Adaptability { control } => commands::experiment_adaptability(&ctx, *control),
        },
    }
}
