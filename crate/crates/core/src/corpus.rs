// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic netlists and the bundled desk-scale corpora.

use crate::netlist::{parse_bench, Gate, GateKind, Netlist};
use crate::rng::{derive_seed_str, SplitMix64};

pub const C17_BENCH: &str = include_str!("../../../data/iscas85/c17.bench");
pub const S27_BENCH: &str = include_str!("../../../data/iscas89/s27.bench");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub inputs: usize,
    pub gates: usize,
    /// State elements; 0 for a combinational circuit.
    pub dffs: usize,
}

fn pick_kind(rng: &mut SplitMix64) -> GateKind {
    // Weights favour AND/NAND/OR/NOR so that low-probability nets occur.
    const TABLE: [(GateKind, u32); 8] = [
        (GateKind::And, 22),
        (GateKind::Nand, 18),
        (GateKind::Or, 14),
        (GateKind::Nor, 14),
        (GateKind::Xor, 8),
        (GateKind::Xnor, 4),
        (GateKind::Not, 14),
        (GateKind::Buff, 6),
    ];
    let total: u32 = TABLE.iter().map(|t| t.1).sum();
    let mut r = rng.below(total as usize) as u32;
    for &(k, w) in &TABLE {
        if r < w {
            return k;
        }
        r -= w;
    }
    unreachable!()
}

/// Random levelized circuit. Gate inputs come mostly from a sliding window
/// of recent nets, which gives depth; every net without a reader becomes a
/// primary output (or, for sequential circuits, may feed a DFF).
pub fn synthesize(name: &str, spec: SynthSpec, seed: u64) -> Netlist {
    assert!(spec.inputs >= 2 && spec.gates >= 1, "degenerate synth spec");
    let mut rng = SplitMix64::new(derive_seed_str(seed, name));
    let mut n = Netlist::new(name);
    n.inputs = (0..spec.inputs).map(|i| format!("i{i}")).collect();
    let state: Vec<String> = (0..spec.dffs).map(|i| format!("q{i}")).collect();
    let mut pool: Vec<String> = n.inputs.iter().chain(&state).cloned().collect();
    let sources = pool.len();
    let mut read = vec![false; sources + spec.gates];
    const WINDOW: usize = 12;

    for g in 0..spec.gates {
        let kind = pick_kind(&mut rng);
        let arity = if kind.is_unary() {
            1
        } else {
            [2, 2, 2, 3, 3, 4][rng.below(6)]
        };
        let mut ins: Vec<usize> = Vec::with_capacity(arity);
        // Early gates sweep the sources so that none is left dangling.
        if g * 2 < sources {
            ins.push(g * 2);
            if arity > 1 && g * 2 + 1 < sources {
                ins.push(g * 2 + 1);
            }
        }
        let mut guard = 0;
        while ins.len() < arity && guard < 64 {
            guard += 1;
            let cand = if rng.next_f64() < 0.7 && pool.len() > sources {
                let lo = pool.len().saturating_sub(WINDOW).max(sources.min(pool.len() - 1));
                lo + rng.below(pool.len() - lo)
            } else {
                rng.below(pool.len())
            };
            if !ins.contains(&cand) {
                ins.push(cand);
            }
        }
        if ins.len() < arity.min(2) || (kind.is_unary() && ins.is_empty()) {
            continue;
        }
        let kind = if ins.len() == 1 && !kind.is_unary() { GateKind::Not } else { kind };
        for &i in &ins {
            read[i] = true;
        }
        let out = format!("n{g}");
        let names: Vec<&str> = ins.iter().map(|&i| pool[i].as_str()).collect();
        n.gates.push(Gate::new(out.clone(), kind, &names));
        pool.push(out);
    }

    let mut sinks: Vec<usize> = (sources..pool.len()).filter(|&i| !read[i]).collect();
    // DFF data inputs: prefer sinks, then late internal nets.
    for (k, q) in state.iter().enumerate() {
        let d = if let Some(s) = sinks.pop() {
            s
        } else {
            let lo = sources.max(pool.len().saturating_sub(WINDOW + k));
            lo + rng.below(pool.len() - lo)
        };
        n.gates.push(Gate::new(q.clone(), GateKind::Dff, &[&pool[d]]));
    }
    if sinks.is_empty() {
        sinks.push(pool.len() - 1);
    }
    n.outputs = sinks.into_iter().map(|i| pool[i].clone()).collect();
    n
}

/// c17 plus five synthetic combinational circuits of 60 to 300 gates.
pub fn desk_corpus(seed: u64) -> Vec<Netlist> {
    let mut v = vec![parse_bench(C17_BENCH).expect("bundled c17").with_name("c17")];
    let specs = [(12, 60), (12, 100), (14, 150), (16, 220), (18, 300)];
    for (i, &(inputs, gates)) in specs.iter().enumerate() {
        v.push(synthesize(
            &format!("syn{}", i + 1),
            SynthSpec { inputs, gates, dffs: 0 },
            seed,
        ));
    }
    v
}

/// s27 plus synthetic sequential circuits; the family held out from training
/// in the adaptability experiment.
pub fn sequential_corpus(seed: u64) -> Vec<Netlist> {
    let mut v = vec![parse_bench(S27_BENCH).expect("bundled s27").with_name("s27")];
    let specs = [(8, 60, 4), (10, 110, 6), (12, 170, 8)];
    for (i, &(inputs, gates, dffs)) in specs.iter().enumerate() {
        v.push(synthesize(&format!("seq{}", i + 1), SynthSpec { inputs, gates, dffs }, seed));
    }
    v
}
