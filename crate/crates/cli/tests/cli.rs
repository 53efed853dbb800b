// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sand_cli::config::Config;
use sand_cli::container::Container;
use sand_cli::models::META;
use sand_core::corpus::desk_corpus;
use sand_core::eval::{run_pipeline, Metrics};

const STAGES: &[&[&str]] = &[
    &["dataset"],
    &["train-encoder"],
    &["embed"],
    &["train-supernet"],
    &["shap"],
    &["prune"],
    &["finetune"],
    &["eval"],
];

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn sand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sand")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(root: &Path) -> Config {
    Config {
        dataset_dir: root.join("dataset").display().to_string(),
        model_dir: root.join("model").display().to_string(),
        out_dir: root.join("out").display().to_string(),
        n_pos: 12,
        n_neg: 12,
        ssl_epochs: 3,
        nas_epochs: 2,
        n_permutations: 4,
        retrain_epochs: 2,
        finetune_epochs: 2,
        trials: 2,
        ..Config::default()
    }
}

fn write_config(root: &Path, cfg: &Config) -> String {
    let p = root.join("sand.toml");
    fs::write(&p, cfg.to_toml()).unwrap();
    p.display().to_string()
}

fn run_stages(config: &str) {
    for stage in STAGES {
        let mut args = vec!["--config", config];
        args.extend_from_slice(stage);
        let o = sand(&args);
        assert!(o.status.success(), "{stage:?} failed: {}", stderr(&o));
    }
}

/// Every file below `dir` except the log, relative path to bytes.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "sand.log") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn metrics_row(csv: &str, model: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{model},")))
        .unwrap_or_else(|| panic!("no {model} row in {csv}"))
        .to_string()
}

#[test]
fn parse_prints_sizes() {
    let o = sand(&["parse", data("iscas85/c17.bench").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "name=c17 inputs=5 outputs=2 gates=6 dffs=0 nodes=13 edges=14");
}

#[test]
fn validate_accepts_and_rejects() {
    let o = sand(&["validate", data("iscas89/s27.bench").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "ok");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bench");
    fs::write(&bad, "INPUT(a)\nOUTPUT(y)\ny = AND(a, ghost)\n").unwrap();
    let o = sand(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error kind=input msg="), "{}", stderr(&o));
    assert!(stderr(&o).contains("ghost"));
}

#[test]
fn missing_model_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model");
    let o = sand(&[
        "--model-dir",
        model.to_str().unwrap(),
        "detect",
        data("iscas85/c17.bench").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error kind=missing_artifact"), "{err}");
    assert!(err.contains("encoder.sandmdl"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn config_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "seed = 1\nepochz = 3\n").unwrap();
    let o = sand(&["--config", p.to_str().unwrap(), "dataset"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error kind=config"), "{}", stderr(&o));

    let o = sand(&["--set", "train_fraction=1.5", "dataset"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("train_fraction"));
}

#[test]
fn staged_run_matches_library_and_repeats_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_a = tiny_config(a.path());
    let cfg_b = tiny_config(b.path());
    run_stages(&write_config(a.path(), &cfg_a));
    run_stages(&write_config(b.path(), &cfg_b));

    // The two configs differ only in their directories, which show up in
    // the stamp, the config copy and each model's meta section.
    let strip = |v: Vec<(PathBuf, Vec<u8>)>| -> Vec<(PathBuf, Vec<u8>)> {
        v.into_iter()
            .filter(|(p, _)| !matches!(p.file_name().and_then(|n| n.to_str()), Some("stamp.toml" | "config.toml")))
            .collect()
    };
    for sub in ["dataset", "model"] {
        let sa = strip(snapshot(&a.path().join(sub)));
        let sb = strip(snapshot(&b.path().join(sub)));
        assert!(!sa.is_empty());
        assert_eq!(sa.len(), sb.len());
        for ((pa, ba), (pb, bb)) in sa.iter().zip(&sb) {
            assert_eq!(pa, pb);
            if pa.extension().is_some_and(|x| x == "sandmdl") {
                // The meta section embeds the config text; compare the models.
                let (ca, cb) = (Container::from_bytes(ba).unwrap(), Container::from_bytes(bb).unwrap());
                assert_eq!(ca.names(), cb.names());
                for name in ca.names().into_iter().filter(|n| *n != META) {
                    assert!(ca.section(name).unwrap() == cb.section(name).unwrap(), "{} differs", pa.display());
                }
            } else {
                assert!(ba == bb, "{} differs between runs", pa.display());
            }
        }
    }

    let lib = run_pipeline(&desk_corpus(cfg_a.corpus_seed), &cfg_a.pipeline()).unwrap();
    let csv = fs::read_to_string(a.path().join("model/metrics.csv")).unwrap();
    let row = |m: &Metrics| m.csv_row();
    assert_eq!(metrics_row(&csv, "full"), row(&lib.full));
    assert_eq!(metrics_row(&csv, "pruned"), row(&lib.pruned_raw));
    assert_eq!(metrics_row(&csv, "finetuned"), row(&lib.pruned));

    let o = sand(&[
        "--config",
        &write_config(a.path(), &cfg_a),
        "detect",
        data("iscas85/c17.bench").to_str().unwrap(),
        data("iscas89/s27.bench").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "bench_path,label,score");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        assert!(f[1] == "0" || f[1] == "1");
        let s: f64 = f[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
}

#[test]
fn rerun_is_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path());
    let config = write_config(root.path(), &cfg);
    run_stages(&config);
    let first = snapshot(root.path());
    run_stages(&config);
    assert_eq!(snapshot(root.path()), first);
}

#[test]
fn other_config_needs_force() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path());
    let config = write_config(root.path(), &cfg);
    let o = sand(&["--config", &config, "dataset"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let before = fs::read(root.path().join("dataset/manifest.csv")).unwrap();

    let o = sand(&["--config", &config, "--seed", "5", "dataset"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error kind=conflict"), "{}", stderr(&o));
    assert_eq!(fs::read(root.path().join("dataset/manifest.csv")).unwrap(), before);

    let o = sand(&["--config", &config, "--seed", "5", "--force", "dataset"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stamp = fs::read_to_string(root.path().join("dataset/stamp.toml")).unwrap();
    assert!(stamp.contains("seed = 5"));
}

#[test]
fn truncated_model_is_reported() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path());
    let config = write_config(root.path(), &cfg);
    for stage in &STAGES[..2] {
        let mut args = vec!["--config", config.as_str()];
        args.extend_from_slice(stage);
        assert!(sand(&args).status.success());
    }
    let enc = root.path().join("model/encoder.sandmdl");
    let bytes = fs::read(&enc).unwrap();
    fs::write(&enc, &bytes[..bytes.len() / 2]).unwrap();
    let o = sand(&["--config", &config, "embed"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error kind=container"), "{err}");
    assert!(err.contains("checksum"), "{err}");
}

#[test]
fn experiment_outputs_carry_hash_and_seed() {
    let root = tempfile::tempdir().unwrap();
    let cfg = Config { seed: 4, ..tiny_config(root.path()) };
    let config = write_config(root.path(), &cfg);
    let o = sand(&["--config", &config, "experiment", "pipeline"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = root.path().join(format!("out/pipeline_{}_s4.csv", cfg.hash()));
    assert!(expected.is_file(), "{}", stdout(&o));
    assert!(expected.with_extension("toml").is_file());
    let csv = fs::read_to_string(&expected).unwrap();
    assert!(csv.starts_with("model,accuracy"));
    assert_eq!(csv.lines().count(), 4);
}
