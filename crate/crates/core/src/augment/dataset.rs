// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{
    demorgan_rewrite, extract_subcircuit, inject_trojan, relocate, AugmentError, PayloadBranch, TrojanConfig,
    TrojanInfo,
};
use crate::netlist::{parse_bench, write_bench, Netlist};
use crate::rng::{derive_seed, SplitMix64};
use crate::sim::{
    check_cone_equivalence, check_equivalence, random_signal_profile, simulate, EquivalenceMode, FrameAssignment,
    Simulator, Verdict,
};

pub const MANIFEST_HEADER: &str = "sample_id,origin,role,transform,seed,label,bench_path";
const TROJAN_HEADER: &str = "sample_id,trigger_nets,trigger_polarity,trigger_width,payload_net,branch,\
trigger_root,inserted_gates,fire_rate,activating_assignment";

const NEG_TAG: u64 = 1 << 32;
const PROFILE_TAG: u64 = 1 << 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Anchor,
    Positive,
    Negative,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Anchor => "anchor",
            Role::Positive => "pos",
            Role::Negative => "neg",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "anchor" => Role::Anchor,
            "pos" => Role::Positive,
            "neg" => Role::Negative,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    None,
    DeMorgan,
    Extract,
    Relocate,
    Trojan,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::None => "none",
            TransformKind::DeMorgan => "demorgan",
            TransformKind::Extract => "extract",
            TransformKind::Relocate => "relocate",
            TransformKind::Trojan => "trojan",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => TransformKind::None,
            "demorgan" => TransformKind::DeMorgan,
            "extract" => TransformKind::Extract,
            "relocate" => TransformKind::Relocate,
            "trojan" => TransformKind::Trojan,
            _ => return None,
        })
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// Index of the originating anchor in [`SampleSet::anchors`].
    pub origin: usize,
    pub role: Role,
    pub transform: TransformKind,
    pub seed: u64,
    /// 0 benign, 1 Trojaned.
    pub label: usize,
    pub netlist: Netlist,
    pub trojan: Option<TrojanInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    /// DeMorgan positives apply between 1 and this many rewrites.
    pub demorgan_max: usize,
    /// Extraction budget is drawn from `[ceil(f · gates), gates]`.
    pub extract_min_fraction: f64,
    pub trigger_width: usize,
    /// Exhaustive certification up to this many frame inputs, random above.
    pub exhaustive_limit: usize,
    pub random_vectors: usize,
    pub profile_vectors: usize,
    /// Attempts per sample before giving up.
    pub max_attempts: usize,
    pub trojan: TrojanConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            demorgan_max: 3,
            extract_min_fraction: 0.5,
            trigger_width: 3,
            exhaustive_limit: 12,
            random_vectors: 4096,
            profile_vectors: 8192,
            max_attempts: 8,
            trojan: TrojanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub anchors: Vec<Netlist>,
    /// Anchors first within each origin group, then positives, then negatives.
    pub samples: Vec<Sample>,
    /// Anchors that received no negatives because they lack rare nets.
    pub skipped_negatives: Vec<String>,
}

impl SampleSet {
    pub fn positives(&self, anchor: usize) -> impl Iterator<Item = &Sample> {
        self.samples
            .iter()
            .filter(move |s| s.origin == anchor && s.role == Role::Positive)
    }

    pub fn negatives(&self, anchor: usize) -> impl Iterator<Item = &Sample> {
        self.samples
            .iter()
            .filter(move |s| s.origin == anchor && s.role == Role::Negative)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn manifest_csv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}.bench\n",
                s.id,
                self.anchors[s.origin].name,
                s.role.as_str(),
                s.transform,
                s.seed,
                s.label,
                s.id
            ));
        }
        out
    }

    pub fn trojans_csv(&self) -> String {
        let mut out = String::from(TROJAN_HEADER);
        out.push('\n');
        for s in &self.samples {
            let Some(t) = &s.trojan else { continue };
            let pol: String = t.trigger_polarity.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let branch = match t.branch {
                PayloadBranch::Output => "output".to_string(),
                PayloadBranch::Pin { gate, pin } => format!("pin:{gate}:{pin}"),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                s.id,
                t.trigger_nets.join(" "),
                pol,
                t.trigger_width,
                t.payload_net,
                branch,
                t.trigger_root,
                t.inserted_gates.join(" "),
                t.fire_rate,
                t.activating_assignment.to_compact()
            ));
        }
        out
    }

    /// Writes one `.bench` per sample plus `manifest.csv` and `trojans.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<(), AugmentError> {
        let io = |e: std::io::Error| AugmentError::Io(e.to_string());
        fs::create_dir_all(dir).map_err(io)?;
        for s in &self.samples {
            fs::write(dir.join(format!("{}.bench", s.id)), write_bench(&s.netlist)).map_err(io)?;
        }
        fs::write(dir.join("manifest.csv"), self.manifest_csv()).map_err(io)?;
        fs::write(dir.join("trojans.csv"), self.trojans_csv()).map_err(io)?;
        Ok(())
    }

    pub fn read_from(dir: &Path) -> Result<Self, AugmentError> {
        let io = |e: std::io::Error| AugmentError::Io(e.to_string());
        let manifest = fs::read_to_string(dir.join("manifest.csv")).map_err(io)?;
        let bad = |line: usize, msg: &str| AugmentError::Manifest {
            line,
            msg: msg.to_string(),
        };
        let mut lines = manifest.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
            _ => return Err(bad(1, "missing header")),
        }
        let mut anchors: Vec<Netlist> = Vec::new();
        let mut anchor_idx: BTreeMap<String, usize> = BTreeMap::new();
        let mut samples = Vec::new();
        for (i, line) in lines {
            let ln = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(ln, "expected 7 fields"));
            }
            let role = Role::parse(f[2]).ok_or_else(|| bad(ln, "unknown role"))?;
            let transform = TransformKind::parse(f[3]).ok_or_else(|| bad(ln, "unknown transform"))?;
            let seed: u64 = f[4].parse().map_err(|_| bad(ln, "bad seed"))?;
            let label: usize = f[5].parse().map_err(|_| bad(ln, "bad label"))?;
            let text = fs::read_to_string(dir.join(f[6])).map_err(io)?;
            let netlist = parse_bench(&text)
                .map_err(|e| bad(ln, &format!("{}: {e}", f[6])))?
                .with_name(f[0]);
            if role == Role::Anchor {
                anchor_idx.insert(f[1].to_string(), anchors.len());
                anchors.push(netlist.clone());
            }
            let origin = *anchor_idx.get(f[1]).ok_or_else(|| bad(ln, "origin listed before its anchor"))?;
            samples.push(Sample {
                id: f[0].to_string(),
                origin,
                role,
                transform,
                seed,
                label,
                netlist,
                trojan: None,
            });
        }
        if let Ok(text) = fs::read_to_string(dir.join("trojans.csv")) {
            for (i, line) in text.lines().enumerate().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let info = parse_trojan_row(line).ok_or_else(|| bad(i + 1, "bad trojans.csv row"))?;
                if let Some(s) = samples.iter_mut().find(|s| s.id == info.0) {
                    s.trojan = Some(info.1);
                }
            }
        }
        Ok(SampleSet {
            anchors,
            samples,
            skipped_negatives: Vec::new(),
        })
    }
}

fn parse_trojan_row(line: &str) -> Option<(String, TrojanInfo)> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 10 {
        return None;
    }
    let words = |s: &str| s.split(' ').filter(|w| !w.is_empty()).map(String::from).collect::<Vec<_>>();
    let branch = if f[5] == "output" {
        PayloadBranch::Output
    } else {
        let mut it = f[5].strip_prefix("pin:")?.split(':');
        PayloadBranch::Pin {
            gate: it.next()?.parse().ok()?,
            pin: it.next()?.parse().ok()?,
        }
    };
    Some((
        f[0].to_string(),
        TrojanInfo {
            trigger_nets: words(f[1]),
            trigger_polarity: f[2].chars().map(|c| c == '1').collect(),
            trigger_width: f[3].parse().ok()?,
            payload_net: f[4].to_string(),
            branch,
            trigger_root: f[6].to_string(),
            inserted_gates: words(f[7]),
            fire_rate: f[8].parse().ok()?,
            activating_assignment: FrameAssignment::from_compact(f[9])?,
        },
    ))
}

fn certify_mode(netlist: &Netlist, seed: u64, cfg: &DatasetConfig) -> EquivalenceMode {
    if netlist.frame_inputs().len() <= cfg.exhaustive_limit {
        EquivalenceMode::Exhaustive
    } else {
        EquivalenceMode::Random {
            n: cfg.random_vectors,
            seed: derive_seed(seed, 7),
        }
    }
}

fn make_positive(anchor: &Netlist, seed: u64, cfg: &DatasetConfig) -> Result<(TransformKind, Netlist), AugmentError> {
    let mut last_err = AugmentError::NoRewritableGate(anchor.name.clone());
    for attempt in 0..cfg.max_attempts.max(1) {
        let s = derive_seed(seed, attempt as u64);
        let mut rng = SplitMix64::new(s);
        let kind = [TransformKind::DeMorgan, TransformKind::Extract, TransformKind::Relocate][rng.below(3)];
        let sub_seed = rng.next_u64();
        let made = match kind {
            TransformKind::DeMorgan => demorgan_rewrite(anchor, sub_seed, 1 + rng.below(cfg.demorgan_max.max(1))),
            TransformKind::Extract => {
                let n = anchor.gates.len().max(3);
                let lo = ((cfg.extract_min_fraction * n as f64).ceil() as usize).clamp(3, n);
                extract_subcircuit(anchor, sub_seed, lo + rng.below(n - lo + 1))
            }
            _ => Ok(relocate(anchor, sub_seed)),
        };
        let candidate = match made {
            Ok(c) => c,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let mode = certify_mode(anchor, s, cfg);
        let verdict = if kind == TransformKind::Extract {
            check_cone_equivalence(anchor, &candidate, mode)?
        } else {
            check_equivalence(anchor, &candidate, mode)?
        };
        if let Verdict::Counterexample(cx) = verdict {
            return Err(AugmentError::Certification {
                sample: anchor.name.clone(),
                reason: format!("{kind} variant differs at {}", cx.to_compact()),
            });
        }
        return Ok((kind, candidate));
    }
    Err(last_err)
}

/// Simulates both circuits on the witness and requires some frame output to differ.
fn certify_negative(anchor: &Netlist, trojaned: &Netlist, info: &TrojanInfo) -> Result<(), AugmentError> {
    let a = simulate(anchor, &info.activating_assignment)?;
    let t = simulate(trojaned, &info.activating_assignment)?;
    let sim = Simulator::new(anchor)?;
    let differs = sim.frame_ports().into_iter().any(|p| a.port(p) != t.port(p));
    if differs {
        Ok(())
    } else {
        Err(AugmentError::Certification {
            sample: trojaned.name.clone(),
            reason: "recorded assignment does not distinguish the Trojan".into(),
        })
    }
}

fn anchor_group(
    index: usize,
    anchor: &Netlist,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
    cfg: &DatasetConfig,
) -> Result<Vec<Sample>, AugmentError> {
    let base = derive_seed(seed, index as u64);
    let mut out = vec![Sample {
        id: anchor.name.clone(),
        origin: index,
        role: Role::Anchor,
        transform: TransformKind::None,
        seed: base,
        label: 0,
        netlist: anchor.clone(),
        trojan: None,
    }];
    for j in 0..n_pos {
        let s = derive_seed(base, j as u64);
        let (kind, net) = make_positive(anchor, s, cfg)?;
        let id = format!("{}_p{j}", anchor.name);
        out.push(Sample {
            netlist: net.with_name(id.clone()),
            id,
            origin: index,
            role: Role::Positive,
            transform: kind,
            seed: s,
            label: 0,
            trojan: None,
        });
    }
    if n_neg == 0 {
        return Ok(out);
    }
    let profile = random_signal_profile(anchor, cfg.profile_vectors, derive_seed(base, PROFILE_TAG))?;
    let mut used: HashSet<(Vec<String>, String, String)> = HashSet::new();
    for j in 0..n_neg {
        let id = format!("{}_n{j}", anchor.name);
        let mut accepted = None;
        let mut last_err = None;
        for attempt in 0..cfg.max_attempts.max(1) {
            let s = derive_seed(derive_seed(base, NEG_TAG + j as u64), attempt as u64);
            match inject_trojan(anchor, s, cfg.trigger_width, &profile, &cfg.trojan) {
                Ok((net, info)) => {
                    let key = (info.trigger_nets.clone(), info.payload_net.clone(), format!("{:?}", info.branch));
                    if used.insert(key) {
                        accepted = Some((s, net, info));
                        break;
                    }
                }
                Err(e @ AugmentError::NotEnoughRareNets { .. }) => return Err(e),
                Err(e) => last_err = Some(e),
            }
        }
        let (s, net, info) = accepted.ok_or_else(|| {
            last_err.unwrap_or_else(|| AugmentError::Certification {
                sample: id.clone(),
                reason: "no distinct Trojan found".into(),
            })
        })?;
        let net = net.with_name(id.clone());
        certify_negative(anchor, &net, &info)?;
        out.push(Sample {
            id,
            origin: index,
            role: Role::Negative,
            transform: TransformKind::Trojan,
            seed: s,
            label: 1,
            netlist: net,
            trojan: Some(info),
        });
    }
    Ok(out)
}

fn check_names(anchors: &[Netlist]) -> Result<(), AugmentError> {
    let mut seen = HashSet::new();
    for a in anchors {
        if !seen.insert(a.name.as_str()) {
            return Err(AugmentError::DuplicateAnchor(a.name.clone()));
        }
    }
    Ok(())
}

fn assemble(
    anchors: &[Netlist],
    counts: &[(usize, usize)],
    seed: u64,
    cfg: &DatasetConfig,
    skipped: Vec<String>,
) -> Result<SampleSet, AugmentError> {
    let groups: Vec<Result<Vec<Sample>, AugmentError>> = anchors
        .par_iter()
        .zip(counts.par_iter())
        .enumerate()
        .map(|(i, (a, &(p, n)))| anchor_group(i, a, p, n, seed, cfg))
        .collect();
    let mut samples = Vec::new();
    for g in groups {
        samples.extend(g?);
    }
    Ok(SampleSet {
        anchors: anchors.to_vec(),
        samples,
        skipped_negatives: skipped,
    })
}

/// `n_pos` positives and `n_neg` distinct negatives for every anchor.
pub fn make_dataset(
    anchors: &[Netlist],
    n_pos: usize,
    n_neg: usize,
    seed: u64,
    cfg: &DatasetConfig,
) -> Result<SampleSet, AugmentError> {
    if n_pos == 0 || n_neg == 0 {
        return Err(AugmentError::ZeroSamples);
    }
    check_names(anchors)?;
    assemble(anchors, &vec![(n_pos, n_neg); anchors.len()], seed, cfg, Vec::new())
}

/// Spreads `total_pos` positives over all anchors and `total_neg` negatives
/// over the anchors that can host a trigger, as evenly
/// as possible (earlier anchors take the remainder).
pub fn make_dataset_budgeted(
    anchors: &[Netlist],
    total_pos: usize,
    total_neg: usize,
    seed: u64,
    cfg: &DatasetConfig,
) -> Result<SampleSet, AugmentError> {
    if total_pos == 0 || total_neg == 0 || anchors.is_empty() {
        return Err(AugmentError::ZeroSamples);
    }
    check_names(anchors)?;
    let mut eligible = Vec::new();
    let mut skipped = Vec::new();
    for (i, a) in anchors.iter().enumerate() {
        let base = derive_seed(seed, i as u64);
        let profile = random_signal_profile(a, cfg.profile_vectors, derive_seed(base, PROFILE_TAG))?;
        let rare = profile
            .probabilities
            .values()
            .filter(|&&p| {
                let q = p.min(1.0 - p);
                q > 0.0 && q < cfg.trojan.rarity_threshold
            })
            .count();
        // Enough rare nets is necessary but not sufficient: the firing-rate
        // bound can still rule out every trigger, as on s27.
        let hosts = rare >= cfg.trigger_width
            && (0..cfg.max_attempts.max(1)).any(|attempt| {
                let s = derive_seed(derive_seed(base, NEG_TAG), attempt as u64);
                inject_trojan(a, s, cfg.trigger_width, &profile, &cfg.trojan).is_ok()
            });
        if hosts {
            eligible.push(i);
        } else {
            skipped.push(a.name.clone());
        }
    }
    if eligible.is_empty() {
        return Err(AugmentError::NotEnoughRareNets {
            need: cfg.trigger_width,
            found: 0,
        });
    }
    let share = |total: usize, slots: usize, k: usize| total / slots + usize::from(k < total % slots);
    let counts: Vec<(usize, usize)> = (0..anchors.len())
        .map(|i| {
            let p = share(total_pos, anchors.len(), i);
            let n = eligible
                .iter()
                .position(|&e| e == i)
                .map_or(0, |k| share(total_neg, eligible.len(), k));
            (p, n)
        })
        .collect();
    assemble(anchors, &counts, seed, cfg, skipped)
}
