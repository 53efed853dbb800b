// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sand_core::augment::{make_dataset_budgeted, SampleSet};
use sand_core::corpus::{desk_corpus, sequential_corpus};
use sand_core::eval::{
    ablation_global_loss, adaptability_experiment, embed_netlists, embed_samples, predict,
    run_pipeline, seeds, split_samples, stability_trials, train_with_snapshots, AdaptabilityReport, Metrics,
    Split,
};
use sand_core::graph::build_graph;
use sand_core::nas::{
    build_supernet, finetune, prune, shapley_estimate, Labeled, NasEpoch, NasHyper, PrunePolicy, ShapleyReport,
    SubNet,
};
use sand_core::netlist::{parse_bench, parse_bench_unchecked, validate, Netlist};
use sand_core::rng::derive_seed;
use sand_core::{EncoderModel, SslHyper};

use crate::config::Config;
use crate::error::CliError;
use crate::models::{self, ENCODER, SUBNET, SUPERNET};

pub const STAMP: &str = "stamp.toml";
pub const LOG: &str = "sand.log";

pub mod files {
    pub const MANIFEST: &str = "manifest.csv";
    pub const SPLIT: &str = "split.csv";
    pub const ENCODER: &str = "encoder.sandmdl";
    pub const ENCODER_LOSS: &str = "encoder_loss.csv";
    pub const SILHOUETTE: &str = "silhouette.csv";
    pub const EMBEDDINGS: &str = "embeddings.csv";
    pub const SUPERNET: &str = "supernet.sandmdl";
    pub const SUPERNET_HISTORY: &str = "supernet_history.csv";
    pub const SHAPLEY: &str = "shapley.csv";
    pub const SHAPLEY_META: &str = "shapley_meta.csv";
    pub const SUBNET: &str = "subnet.sandmdl";
    pub const MASK: &str = "mask.txt";
    pub const FINETUNED: &str = "finetuned.sandmdl";
    pub const FINETUNE_HISTORY: &str = "finetune_history.csv";
    pub const METRICS: &str = "metrics.csv";
}

/// Everything a command needs besides its own arguments.
pub struct Ctx {
    pub cfg: Config,
    pub hash: String,
    pub force: bool,
    pub command: String,
}

impl Ctx {
    pub fn new(cfg: Config, force: bool, command: &str) -> Self {
        Self {
            hash: cfg.hash(),
            cfg,
            force,
            command: command.into(),
        }
    }

    fn meta(&self) -> crate::container::Section {
        models::meta_section(&self.hash, self.cfg.seed, &self.cfg.to_toml())
    }

    /// Prepares `dir` for writing. A directory stamped by a different
    /// configuration is refused unless `--force` was given.
    fn claim(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let stamp = dir.join(STAMP);
        if let Ok(text) = fs::read_to_string(&stamp) {
            let old = text
                .lines()
                .find_map(|l| l.strip_prefix("config_hash = "))
                .map(|s| s.trim().trim_matches('"').to_string())
                .unwrap_or_default();
            if old != self.hash && !self.force {
                return Err(CliError::Conflict(format!(
                    "{} holds artifacts of config {old}, current config is {}; pass --force to overwrite",
                    dir.display(),
                    self.hash
                )));
            }
        }
        fs::write(&stamp, format!("config_hash = \"{}\"\nseed = {}\n", self.hash, self.cfg.seed))?;
        fs::write(dir.join("config.toml"), self.cfg.to_toml())?;
        self.log(dir, "start")
    }

    /// Timestamps appear only here.
    fn log(&self, dir: &Path, what: &str) -> Result<(), CliError> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join(LOG))?;
        writeln!(f, "{secs} {} {what} config={} seed={}", self.command, self.hash, self.cfg.seed)?;
        Ok(())
    }

    fn pipeline_nas(&self) -> NasHyper {
        NasHyper {
            seed: derive_seed(self.cfg.seed, seeds::NAS_TRAIN),
            ..self.cfg.nas()
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|_| CliError::MissingArtifact(path.to_path_buf()))
}

fn require(path: PathBuf) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact(path))
    }
}

/// `.bench` files named directly or found (non-recursively) in directories, sorted.
pub fn bench_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "bench"))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::MissingArtifact(p.clone()));
        }
    }
    Ok(out)
}

fn load_bench(path: &Path) -> Result<Netlist, CliError> {
    let text = read(path)?;
    let name = path.file_stem().map_or("netlist".into(), |s| s.to_string_lossy().into_owned());
    parse_bench(&text)
        .map(|n| n.with_name(name))
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn corpus_from(dir: &str, builtin: fn(u64) -> Vec<Netlist>, seed: u64) -> Result<Vec<Netlist>, CliError> {
    if dir.is_empty() {
        return Ok(builtin(seed));
    }
    let files = bench_files(&[PathBuf::from(dir)])?;
    if files.is_empty() {
        return Err(CliError::Input(format!("{dir} holds no .bench files")));
    }
    files.iter().map(|f| load_bench(f)).collect()
}

pub fn anchors(cfg: &Config) -> Result<Vec<Netlist>, CliError> {
    corpus_from(&cfg.bench_dir, desk_corpus, cfg.corpus_seed)
}

pub fn unseen(cfg: &Config) -> Result<Vec<Netlist>, CliError> {
    corpus_from(&cfg.unseen_dir, sequential_corpus, cfg.corpus_seed)
}

// ---- netlist inspection ----

pub fn parse(path: &Path) -> Result<String, CliError> {
    let n = load_bench(path)?;
    let g = build_graph(&n);
    Ok(format!(
        "name={} inputs={} outputs={} gates={} dffs={} nodes={} edges={}",
        n.name,
        n.inputs.len(),
        n.outputs.len(),
        n.gates.len(),
        n.dff_count(),
        g.node_count,
        g.edges.len()
    ))
}

/// One line per violation; `Ok` carries `"ok"` when the netlist is clean.
pub fn validate_file(path: &Path) -> Result<String, CliError> {
    let text = read(path)?;
    let n = parse_bench_unchecked(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let v = validate(&n);
    if v.is_empty() {
        return Ok("ok".into());
    }
    let lines: Vec<String> = v.iter().map(|x| format!("violation {x}")).collect();
    Err(CliError::Input(lines.join("; ")))
}

pub fn synth(cfg: &Config, out: &Path, family: &str) -> Result<Vec<PathBuf>, CliError> {
    let nets = match family {
        "desk" => desk_corpus(cfg.corpus_seed),
        "sequential" => sequential_corpus(cfg.corpus_seed),
        f => return Err(CliError::Input(format!("unknown family `{f}` (desk, sequential)"))),
    };
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for n in nets {
        let p = out.join(format!("{}.bench", n.name));
        write(&p, &sand_core::netlist::write_bench(&n))?;
        written.push(p);
    }
    Ok(written)
}

// ---- pipeline stages ----

pub fn dataset(ctx: &Ctx) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let corpus = anchors(cfg)?;
    let dir = cfg.dataset_dir();
    ctx.claim(&dir)?;
    let set = make_dataset_budgeted(&corpus, cfg.n_pos, cfg.n_neg, derive_seed(cfg.seed, seeds::DATASET), &cfg.dataset_config())?;
    set.write_to(&dir)?;
    let split = split_samples(&set, cfg.train_fraction, derive_seed(cfg.seed, seeds::SPLIT));
    write(&dir.join(files::SPLIT), &split.to_csv(&set))?;
    ctx.log(&dir, "done")?;
    let n_neg = set.samples.iter().filter(|s| s.label == 1).count();
    Ok(format!(
        "samples={} anchors={} negatives={} train={} test={} skipped_negatives={}",
        set.samples.len(),
        set.anchors.len(),
        n_neg,
        split.train.len(),
        split.test.len(),
        set.skipped_negatives.join(" ")
    ))
}

fn load_dataset(cfg: &Config) -> Result<(SampleSet, Split), CliError> {
    let dir = cfg.dataset_dir();
    require(dir.join(files::MANIFEST))?;
    let set = SampleSet::read_from(&dir)?;
    let split = Split::from_csv(&read(&require(dir.join(files::SPLIT))?)?, &set)?;
    Ok((set, split))
}

pub fn train_encoder(ctx: &Ctx) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let (set, split) = load_dataset(cfg)?;
    let dir = cfg.model_dir();
    ctx.claim(&dir)?;
    let train: Vec<_> = split.train.iter().map(|&i| &set.samples[i]).collect();
    let hyper = SslHyper {
        seed: derive_seed(cfg.seed, seeds::ENCODER),
        ..cfg.ssl()
    };
    let run = train_with_snapshots(&train, &hyper, &[0, hyper.epochs])?;
    models::save(&dir.join(files::ENCODER), ENCODER, &models::encoder_section(&run.model), &ctx.meta())?;
    let mut loss = format!("{}\n", sand_core::encoder::EpochLoss::CSV_HEADER);
    for e in &run.history {
        loss.push_str(&e.csv_row());
        loss.push('\n');
    }
    write(&dir.join(files::ENCODER_LOSS), &loss)?;
    let mut sil = String::from("epoch,silhouette\n");
    for s in &run.snapshots {
        write(&dir.join(format!("snapshot_e{}.csv", s.epoch)), &s.to_csv())?;
        sil.push_str(&format!("{},{}\n", s.epoch, s.silhouette));
    }
    write(&dir.join(files::SILHOUETTE), &sil)?;
    ctx.log(&dir, "done")?;
    let last = run.history.last().map_or(f64::NAN, |e| e.parts.total);
    let sil: Vec<String> = run.snapshots.iter().map(|s| format!("{}:{:.4}", s.epoch, s.silhouette)).collect();
    Ok(format!("epochs={} final_loss={last:.6} silhouette={}", hyper.epochs, sil.join(" ")))
}

fn load_encoder(cfg: &Config) -> Result<EncoderModel, CliError> {
    let p = require(cfg.model_dir().join(files::ENCODER))?;
    models::encoder_from(&models::load_section(&p, ENCODER)?)
}

/// Row of `embeddings.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub id: String,
    pub label: usize,
    pub split: String,
    pub z: Vec<f64>,
}

pub fn embeddings_csv(rows: &[EmbeddingRow]) -> String {
    let dz = rows.first().map_or(0, |r| r.z.len());
    let mut s = String::from("sample_id,label,split");
    for k in 0..dz {
        s.push_str(&format!(",z{k}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{}", r.id, r.label, r.split));
        for v in &r.z {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

pub fn parse_embeddings(text: &str) -> Result<Vec<EmbeddingRow>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::Input(format!("embeddings line {}: malformed", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 4 {
            return Err(bad());
        }
        out.push(EmbeddingRow {
            id: f[0].into(),
            label: f[1].parse().map_err(|_| bad())?,
            split: f[2].into(),
            z: f[3..].iter().map(|v| v.parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
        });
    }
    Ok(out)
}

pub fn embed(ctx: &Ctx) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let (set, split) = load_dataset(cfg)?;
    let model = load_encoder(cfg)?;
    let dir = cfg.model_dir();
    ctx.claim(&dir)?;
    let z = embed_samples(&model, &set.samples)?;
    let mut tag = vec!["train"; set.samples.len()];
    split.test.iter().for_each(|&i| tag[i] = "test");
    let rows: Vec<EmbeddingRow> = set
        .samples
        .iter()
        .zip(z)
        .zip(tag)
        .map(|((s, z), t)| EmbeddingRow {
            id: s.id.clone(),
            label: s.label,
            split: t.into(),
            z,
        })
        .collect();
    write(&dir.join(files::EMBEDDINGS), &embeddings_csv(&rows))?;
    ctx.log(&dir, "done")?;
    Ok(format!("embedded={} dim={}", rows.len(), rows.first().map_or(0, |r| r.z.len())))
}

fn load_split_embeddings(path: &Path, which: &str) -> Result<Vec<Labeled>, CliError> {
    let rows = parse_embeddings(&read(&require(path.to_path_buf())?)?)?;
    let data: Vec<Labeled> = rows.into_iter().filter(|r| r.split == which).map(|r| (r.z, r.label)).collect();
    if data.is_empty() {
        return Err(CliError::Input(format!("{} has no `{which}` rows", path.display())));
    }
    Ok(data)
}

fn history_csv(h: &[NasEpoch]) -> String {
    let mut s = format!("{}\n", NasEpoch::CSV_HEADER);
    for e in h {
        s.push_str(&e.csv_row());
        s.push('\n');
    }
    s
}

pub fn train_supernet(ctx: &Ctx) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let dir = cfg.model_dir();
    let train = load_split_embeddings(&dir.join(files::EMBEDDINGS), "train")?;
    ctx.claim(&dir)?;
    let mut net = build_supernet(train[0].0.len(), derive_seed(cfg.seed, seeds::NAS_INIT))?;
    let history = sand_core::nas::train_supernet(&mut net, &train, &[], &ctx.pipeline_nas())?;
    models::save(&dir.join(files::SUPERNET), SUPERNET, &models::supernet_section(&net), &ctx.meta())?;
    write(&dir.join(files::SUPERNET_HISTORY), &history_csv(&history))?;
    ctx.log(&dir, "done")?;
    let last = history.last().expect("epoch 0 is always recorded");
    Ok(format!("epochs={} loss={:.6} train_acc={:.4}", last.epoch, last.loss, last.train_acc))
}

fn load_supernet(cfg: &Config) -> Result<sand_core::SuperNet, CliError> {
    let p = require(cfg.model_dir().join(files::SUPERNET))?;
    models::supernet_from(&models::load_section(&p, SUPERNET)?)
}

pub fn shap(ctx: &Ctx) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let dir = cfg.model_dir();
    let train = load_split_embeddings(&dir.join(files::EMBEDDINGS), "train")?;
    let net = load_supernet(cfg)?;
    ctx.claim(&dir)?;
    let report = shapley_estimate(&net, &train, cfg.n_permutations, derive_seed(cfg.seed, seeds::SHAPLEY))?;
    write(&dir.join(files::SHAPLEY), &report.to_csv())?;
    write(
        &dir.join(files::SHAPLEY_META),
        &format!(
            "n_permutations,seed,v_empty,v_full\n{},{},{},{}\n",
            report.n_permutations, report.seed, report.v_empty, report.v_full
        ),
    )?;
    ctx.log(&dir, "done")?;
    let negative = report.phi.iter().filter(|&&p| p < 0.0).count();
    Ok(format!(
        "cells={} negative={} v_empty={:.4} v_full={:.4} sum_phi={:.6}",
        report.phi.len(),
        negative,
        report.v_empty,
        report.v_full,
        report.phi.iter().sum::<f64>()
    ))
}

fn load_report(cfg: &Config, net: &sand_core::SuperNet) -> Result<ShapleyReport, CliError> {
    let dir = cfg.model_dir();
    let rows = ShapleyReport::phi_from_csv(&read(&require(dir.join(files::SHAPLEY))?)?)?;
    let meta = read(&require(dir.join(files::SHAPLEY_META))?)?;
    let bad = || CliError::Input(format!("{} is malformed", files::SHAPLEY_META));
    let f: Vec<&str> = meta.lines().nth(1).ok_or_else(bad)?.split(',').collect();
    if f.len() != 4 {
        return Err(bad());
    }
    let per = net.cells_per_layer();
    let mut phi = vec![f64::NAN; net.n_cells()];
    for (l, c, kind, p) in rows {
        let i = l * per + c;
        if c >= per || i >= phi.len() || net.layers[l][c].kind != kind {
            return Err(CliError::Input(format!("{} does not match the SuperNet", files::SHAPLEY)));
        }
        phi[i] = p;
    }
    if phi.iter().any(|p| p.is_nan()) {
        return Err(CliError::Input(format!("{} does not cover every cell", files::SHAPLEY)));
    }
    Ok(ShapleyReport {
        phi,
        kinds: net.layers.iter().flatten().map(|c| c.kind).collect(),
        cells_per_layer: per,
        n_permutations: f[0].parse().map_err(|_| bad())?,
        seed: f[1].parse().map_err(|_| bad())?,
        v_empty: f[2].parse().map_err(|_| bad())?,
        v_full: f[3].parse().map_err(|_| bad())?,
    })
}

pub fn prune_cmd(ctx: &Ctx, top_k: Option<usize>) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let dir = cfg.model_dir();
    let net = load_supernet(cfg)?;
    let report = load_report(cfg, &net)?;
    ctx.claim(&dir)?;
    let policy = top_k.map_or(PrunePolicy::Threshold(cfg.tau), PrunePolicy::TopK);
    let sub = prune(&net, &report, policy)?;
    models::save(&dir.join(files::SUBNET), SUBNET, &models::subnet_section(&sub), &ctx.meta())?;
    write(&dir.join(files::MASK), &sub.net().mask_grid())?;
    ctx.log(&dir, "done")?;
    Ok(format!(
        "policy={policy} active={} of {} pruned_fraction={:.4}",
        sub.net().active_count(),
        sub.net().n_cells(),
        sub.pruned_fraction()
    ))
}

fn load_subnet(path: &Path) -> Result<SubNet, CliError> {
    models::subnet_from(&models::load_section(&require(path.to_path_buf())?, SUBNET)?)
}

/// Trains the pruned SubNet's active cells on the `train` rows of an
/// embeddings CSV. Without `data` this is the post-pruning retrain on the
/// model directory's embeddings (`retrain_epochs`, `nas_lr`); with `data` it
/// adapts to another family (`finetune_epochs`, `finetune_lr`).
pub fn finetune_cmd(ctx: &Ctx, epochs: Option<usize>, data: Option<&Path>) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let dir = cfg.model_dir();
    let sub = load_subnet(&dir.join(files::SUBNET))?;
    let data_path = data.map_or_else(|| dir.join(files::EMBEDDINGS), Path::to_path_buf);
    let train = load_split_embeddings(&data_path, "train")?;
    let mut hyper = ctx.pipeline_nas();
    let default_epochs = if data.is_some() {
        hyper.adam.lr = cfg.finetune_lr;
        cfg.finetune_epochs
    } else {
        cfg.retrain_epochs
    };
    let epochs = epochs.unwrap_or(default_epochs);
    ctx.claim(&dir)?;
    let (tuned, history) = finetune(&sub, &train, &[], epochs, &hyper)?;
    models::save(&dir.join(files::FINETUNED), SUBNET, &models::subnet_section(&tuned), &ctx.meta())?;
    write(&dir.join(files::FINETUNE_HISTORY), &history_csv(&history))?;
    ctx.log(&dir, "done")?;
    let last = history.last().expect("epoch 0 is always recorded");
    Ok(format!("epochs={epochs} loss={:.6} train_acc={:.4}", last.loss, last.train_acc))
}

/// Which stored classifier `detect` and `eval` use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Classifier {
    /// Pruned and retrained (`finetuned.sandmdl`).
    Finetuned,
    /// Pruned, before retraining (`subnet.sandmdl`).
    Pruned,
    /// Unpruned (`supernet.sandmdl`).
    Full,
}

impl Classifier {
    fn load(self, cfg: &Config) -> Result<SubNet, CliError> {
        let dir = cfg.model_dir();
        match self {
            Classifier::Finetuned => load_subnet(&dir.join(files::FINETUNED)),
            Classifier::Pruned => load_subnet(&dir.join(files::SUBNET)),
            Classifier::Full => Ok(SubNet::from_parts(load_supernet(cfg)?, PrunePolicy::Threshold(f64::NEG_INFINITY), 0, 0)),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Classifier::Finetuned => "finetuned",
            Classifier::Pruned => "pruned",
            Classifier::Full => "full",
        }
    }
}

/// `bench_path,label,score` per input; `score` is the Trojan probability.
pub fn detect(ctx: &Ctx, inputs: &[PathBuf], classifier: Classifier) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let model = load_encoder(cfg)?;
    let sub = classifier.load(cfg)?;
    let paths = bench_files(inputs)?;
    if paths.is_empty() {
        return Err(CliError::Input("no .bench inputs".into()));
    }
    let nets = paths.iter().map(|p| load_bench(p)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Netlist> = nets.iter().collect();
    let z = embed_netlists(&model, &refs)?;
    let mut out = String::from("bench_path,label,score\n");
    for (p, z) in paths.iter().zip(&z) {
        let (label, p_label) = sub.classify(z)?;
        let score = if label == 1 { p_label } else { 1.0 - p_label };
        out.push_str(&format!("{},{label},{score:.6}\n", p.display()));
    }
    Ok(out.trim_end().to_string())
}

/// Held-out metrics for every classifier artifact present; at least one must exist.
pub fn eval(ctx: &Ctx) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let dir = cfg.model_dir();
    let test = load_split_embeddings(&dir.join(files::EMBEDDINGS), "test")?;
    let mut rows = Vec::new();
    let mut first_missing = None;
    for c in [Classifier::Full, Classifier::Pruned, Classifier::Finetuned] {
        match c.load(cfg) {
            Ok(sub) => rows.push((c.name(), predict(&sub, &test)?)),
            Err(CliError::MissingArtifact(p)) => {
                first_missing.get_or_insert(p);
            }
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(CliError::MissingArtifact(first_missing.unwrap_or_else(|| dir.join(files::FINETUNED))));
    }
    ctx.claim(&dir)?;
    let mut s = format!("model,{}\n", Metrics::CSV_HEADER);
    for (name, m) in &rows {
        s.push_str(&format!("{name},{}\n", m.csv_row()));
    }
    write(&dir.join(files::METRICS), &s)?;
    ctx.log(&dir, "done")?;
    Ok(s.trim_end().to_string())
}

// ---- experiments ----

fn experiment_path(ctx: &Ctx, name: &str, ext: &str) -> PathBuf {
    ctx.cfg.out_dir().join(format!("{name}_{}_s{}.{ext}", ctx.hash, ctx.cfg.seed))
}

fn write_experiment(ctx: &Ctx, name: &str, csv: &str) -> Result<PathBuf, CliError> {
    let dir = ctx.cfg.out_dir();
    fs::create_dir_all(&dir)?;
    let path = experiment_path(ctx, name, "csv");
    write(&path, csv)?;
    write(&experiment_path(ctx, name, "toml"), &ctx.cfg.to_toml())?;
    ctx.log(&dir, &format!("wrote {}", path.display()))?;
    Ok(path)
}

pub fn experiment_pipeline(ctx: &Ctx) -> Result<String, CliError> {
    let cfg = &ctx.cfg;
    let out = run_pipeline(&anchors(cfg)?, &cfg.pipeline())?;
    let mut s = format!("model,{}\n", Metrics::CSV_HEADER);
    for (name, m) in [("full", &out.full), ("pruned", &out.pruned_raw), ("finetuned", &out.pruned)] {
        s.push_str(&format!("{name},{}\n", m.csv_row()));
    }
    let path = write_experiment(ctx, "pipeline", &s)?;
    for snap in &out.encoder.snapshots {
        write_experiment(ctx, &format!("pca_e{}", snap.epoch), &snap.to_csv())?;
    }
    let sil: Vec<String> = out.encoder.snapshots.iter().map(|s| format!("{}:{:.4}", s.epoch, s.silhouette)).collect();
    Ok(format!(
        "{}\npruned_fraction={:.4} silhouette={}\nwrote {}",
        s.trim_end(),
        out.classifier.subnet.pruned_fraction(),
        sil.join(" "),
        path.display()
    ))
}

pub fn experiment_ablation(ctx: &Ctx) -> Result<String, CliError> {
    let report = ablation_global_loss(&anchors(&ctx.cfg)?, &ctx.cfg.pipeline())?;
    let csv = report.to_csv();
    let path = write_experiment(ctx, "ablation", &csv)?;
    Ok(format!("{}\nwrote {}", csv.trim_end(), path.display()))
}

pub fn experiment_stability(ctx: &Ctx) -> Result<String, CliError> {
    let report = stability_trials(&anchors(&ctx.cfg)?, &ctx.cfg.pipeline(), ctx.cfg.trials)?;
    let path = write_experiment(ctx, "stability", &report.to_csv())?;
    Ok(format!(
        "trials={} mean={:.4} stddev={:.4}\nwrote {}",
        report.accuracies.len(),
        report.mean,
        report.stddev,
        path.display()
    ))
}

/// With `control`, the seen family doubles as the unseen one.
pub fn experiment_adaptability(ctx: &Ctx, control: bool) -> Result<String, CliError> {
    let seen = anchors(&ctx.cfg)?;
    let unseen = if control { seen.clone() } else { unseen(&ctx.cfg)? };
    let report = adaptability_experiment(&seen, &unseen, &ctx.cfg.pipeline(), control)?;
    let csv = format!("{}\n{}\n", AdaptabilityReport::CSV_HEADER, report.csv_row());
    let name = if control { "adaptability_control" } else { "adaptability" };
    let path = write_experiment(ctx, name, &csv)?;
    Ok(format!("{}\nwrote {}", csv.trim_end(), path.display()))
}
