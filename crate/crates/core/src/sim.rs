// SPDX-License-Identifier: Apache-2.0

//! Bit-parallel logic simulation with single-frame sequential semantics.
//!
//! DFF outputs are pseudo primary inputs and DFF data inputs are pseudo
//! primary outputs ("next state"), so every netlist is evaluated as one
//! combinational frame. Values are packed 64 vectors per `u64`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::netlist::{validate, Driver, GateKind, Netlist, Violation};
use crate::rng::SplitMix64;

/// Upper bound on frame inputs for exhaustive enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("netlist is invalid: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("assignment is missing frame input `{0}`")]
    Missing(String),
    #[error("assignment names `{0}`, which is not a frame input")]
    Extra(String),
    #[error("frame interfaces differ: {0}")]
    InterfaceMismatch(String),
    #[error("exhaustive check over {k} frame inputs exceeds the limit of {limit}")]
    TooManyInputs { k: usize, limit: usize },
    #[error("net `{0}` of the sub-circuit does not exist in the reference")]
    UnknownNet(String),
}

/// A frame output: a primary output, or the next-state value of a DFF
/// (keyed by the DFF's state net).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FramePort {
    Output(String),
    NextState(String),
}

impl fmt::Display for FramePort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FramePort::Output(n) => write!(f, "{n}"),
            FramePort::NextState(n) => write!(f, "next:{n}"),
        }
    }
}

/// Bit value for every frame input (primary inputs and DFF outputs).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FrameAssignment(pub BTreeMap<String, bool>);

impl FrameAssignment {
    pub fn get(&self, net: &str) -> Option<bool> {
        self.0.get(net).copied()
    }

    /// `net=bit` pairs joined by `;`, in name order.
    pub fn to_compact(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={}", *v as u8))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn from_compact(s: &str) -> Option<Self> {
        let mut m = BTreeMap::new();
        for part in s.split(';').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=')?;
            let bit = match v {
                "0" => false,
                "1" => true,
                _ => return None,
            };
            m.insert(k.to_string(), bit);
        }
        Some(FrameAssignment(m))
    }
}

/// Compiled, levelized form of a valid netlist.
#[derive(Debug, Clone)]
pub struct Simulator {
    names: Vec<String>,
    index: HashMap<String, usize>,
    frame_inputs: Vec<usize>,
    frame_outputs: Vec<(FramePort, usize)>,
    /// Non-DFF gates in topological order: (output net, kind, input nets).
    program: Vec<(usize, GateKind, Vec<usize>)>,
}

impl Simulator {
    pub fn new(netlist: &Netlist) -> Result<Self, SimError> {
        let report = validate(netlist);
        if !report.is_empty() {
            return Err(SimError::Invalid(report));
        }
        let n_in = netlist.inputs.len();
        let mut names: Vec<String> = netlist.inputs.clone();
        names.extend(netlist.gates.iter().map(|g| g.output.clone()));
        let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

        let drivers = netlist.drivers();
        let net_of = |name: &str| -> usize {
            match drivers[name] {
                Driver::Input(i) => i,
                Driver::Gate(g) => n_in + g,
            }
        };

        let frame_inputs: Vec<usize> = netlist.frame_inputs().iter().map(|n| net_of(n)).collect();
        let mut frame_outputs: Vec<(FramePort, usize)> = netlist
            .outputs
            .iter()
            .map(|o| (FramePort::Output(o.clone()), net_of(o)))
            .collect();
        for g in netlist.gates.iter().filter(|g| g.kind == GateKind::Dff) {
            frame_outputs.push((FramePort::NextState(g.output.clone()), net_of(&g.inputs[0])));
        }

        // Kahn levelization over combinational gates; DFF outputs count as sources.
        let ng = netlist.gates.len();
        let mut indeg = vec![0usize; ng];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); ng];
        for (gi, g) in netlist.gates.iter().enumerate() {
            if g.kind == GateKind::Dff {
                continue;
            }
            for i in &g.inputs {
                if let Driver::Gate(d) = drivers[i.as_str()] {
                    if netlist.gates[d].kind != GateKind::Dff {
                        succ[d].push(gi);
                        indeg[gi] += 1;
                    }
                }
            }
        }
        let mut ready: Vec<usize> = (0..ng)
            .filter(|&g| netlist.gates[g].kind != GateKind::Dff && indeg[g] == 0)
            .rev()
            .collect();
        let mut program = Vec::with_capacity(ng);
        while let Some(g) = ready.pop() {
            let gate = &netlist.gates[g];
            program.push((n_in + g, gate.kind, gate.inputs.iter().map(|i| net_of(i)).collect()));
            for &s in succ[g].iter().rev() {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(s);
                }
            }
        }
        Ok(Self {
            names,
            index,
            frame_inputs,
            frame_outputs,
            program,
        })
    }

    pub fn net_count(&self) -> usize {
        self.names.len()
    }

    pub fn net_name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn net_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn frame_input_names(&self) -> Vec<&str> {
        self.frame_inputs.iter().map(|&i| self.names[i].as_str()).collect()
    }

    pub fn frame_ports(&self) -> Vec<&FramePort> {
        self.frame_outputs.iter().map(|(p, _)| p).collect()
    }

    pub fn frame_output_nets(&self) -> Vec<usize> {
        self.frame_outputs.iter().map(|&(_, n)| n).collect()
    }

    /// Evaluates 64 packed vectors; `frame` holds one word per frame input in
    /// [`frame_input_names`](Self::frame_input_names) order. Returns a word per net.
    pub fn eval(&self, frame: &[u64]) -> Vec<u64> {
        let mut values = vec![0u64; self.names.len()];
        self.eval_into(frame, &mut values);
        values
    }

    pub fn eval_into(&self, frame: &[u64], values: &mut [u64]) {
        assert_eq!(frame.len(), self.frame_inputs.len(), "frame width");
        for (&net, &w) in self.frame_inputs.iter().zip(frame) {
            values[net] = w;
        }
        let mut buf = Vec::with_capacity(8);
        for (out, kind, ins) in &self.program {
            buf.clear();
            buf.extend(ins.iter().map(|&i| values[i]));
            values[*out] = kind.eval_words(&buf);
        }
    }

    fn frame_words(&self, assignment: &FrameAssignment) -> Result<Vec<u64>, SimError> {
        let wanted: BTreeSet<&str> = self.frame_input_names().into_iter().collect();
        if let Some(extra) = assignment.0.keys().find(|k| !wanted.contains(k.as_str())) {
            return Err(SimError::Extra(extra.clone()));
        }
        self.frame_inputs
            .iter()
            .map(|&n| {
                let name = &self.names[n];
                assignment
                    .get(name)
                    .map(|b| if b { !0 } else { 0 })
                    .ok_or_else(|| SimError::Missing(name.clone()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    /// Every net's value in this frame.
    pub nets: BTreeMap<String, bool>,
    /// DFF state net → value latched at the end of the frame.
    pub next_state: BTreeMap<String, bool>,
}

impl SimResult {
    pub fn port(&self, port: &FramePort) -> Option<bool> {
        match port {
            FramePort::Output(n) => self.nets.get(n).copied(),
            FramePort::NextState(n) => self.next_state.get(n).copied(),
        }
    }
}

/// Single-vector simulation.
pub fn simulate(netlist: &Netlist, frame_in: &FrameAssignment) -> Result<SimResult, SimError> {
    let sim = Simulator::new(netlist)?;
    simulate_with(&sim, frame_in)
}

pub fn simulate_with(sim: &Simulator, frame_in: &FrameAssignment) -> Result<SimResult, SimError> {
    let words = sim.frame_words(frame_in)?;
    let values = sim.eval(&words);
    let nets = sim
        .names
        .iter()
        .zip(&values)
        .map(|(n, &w)| (n.clone(), w & 1 == 1))
        .collect();
    let next_state = sim
        .frame_outputs
        .iter()
        .filter_map(|(p, net)| match p {
            FramePort::NextState(s) => Some((s.clone(), values[*net] & 1 == 1)),
            FramePort::Output(_) => None,
        })
        .collect();
    Ok(SimResult { nets, next_state })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceMode {
    /// All `2^k` frame inputs (`k ≤ 24`).
    Exhaustive,
    /// `n` pseudo-random vectors from the given seed.
    Random { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    Counterexample(FrameAssignment),
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent)
    }
}

/// Words for input `i` of chunk `c` in an exhaustive sweep: vector index is
/// `64·c + lane`, and input `i` takes bit `i` of the vector index.
fn exhaustive_word(i: usize, chunk: u64) -> u64 {
    const LANE: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    if i < 6 {
        LANE[i]
    } else if (chunk >> (i - 6)) & 1 == 1 {
        !0
    } else {
        0
    }
}

/// A stream of packed frame-input words, either exhaustive or seeded random.
/// `inputs` fixes the order in which random words are drawn.
pub struct VectorSource {
    k: usize,
    mode: EquivalenceMode,
    rng: SplitMix64,
    chunk: u64,
    remaining: u64,
}

impl VectorSource {
    pub fn new(k: usize, mode: EquivalenceMode) -> Result<Self, SimError> {
        let (remaining, seed) = match mode {
            EquivalenceMode::Exhaustive => {
                if k > EXHAUSTIVE_LIMIT {
                    return Err(SimError::TooManyInputs {
                        k,
                        limit: EXHAUSTIVE_LIMIT,
                    });
                }
                (1u64 << k, 0)
            }
            EquivalenceMode::Random { n, seed } => (n as u64, seed),
        };
        Ok(Self {
            k,
            mode,
            rng: SplitMix64::new(seed),
            chunk: 0,
            remaining,
        })
    }

    /// Fills `words` (length `k`) and returns the lane mask, or `None` when exhausted.
    pub fn next_chunk(&mut self, words: &mut [u64]) -> Option<u64> {
        if self.remaining == 0 {
            return None;
        }
        let lanes = self.remaining.min(64);
        let mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        match self.mode {
            EquivalenceMode::Exhaustive => {
                for (i, w) in words.iter_mut().enumerate().take(self.k) {
                    *w = exhaustive_word(i, self.chunk);
                }
            }
            EquivalenceMode::Random { .. } => {
                for w in words.iter_mut().take(self.k) {
                    *w = self.rng.next_u64();
                }
            }
        }
        self.remaining -= lanes;
        self.chunk += 1;
        Some(mask)
    }
}

fn assignment_from_lane(names: &[&str], words: &[u64], lane: u32) -> FrameAssignment {
    FrameAssignment(
        names
            .iter()
            .zip(words)
            .map(|(n, w)| (n.to_string(), (w >> lane) & 1 == 1))
            .collect(),
    )
}

/// Frame-level functional equivalence. Random vectors are drawn over the
/// frame inputs in sorted-name order, so the verdict is symmetric in `a`, `b`.
pub fn check_equivalence(a: &Netlist, b: &Netlist, mode: EquivalenceMode) -> Result<Verdict, SimError> {
    let sa = Simulator::new(a)?;
    let sb = Simulator::new(b)?;
    let ia: BTreeSet<&str> = sa.frame_input_names().into_iter().collect();
    let ib: BTreeSet<&str> = sb.frame_input_names().into_iter().collect();
    if ia != ib {
        return Err(SimError::InterfaceMismatch(format!(
            "frame inputs {:?}",
            ia.symmetric_difference(&ib).collect::<Vec<_>>()
        )));
    }
    let pa: BTreeSet<&FramePort> = sa.frame_ports().into_iter().collect();
    let pb: BTreeSet<&FramePort> = sb.frame_ports().into_iter().collect();
    if pa != pb {
        return Err(SimError::InterfaceMismatch(format!(
            "frame outputs {:?}",
            pa.symmetric_difference(&pb).map(|p| p.to_string()).collect::<Vec<_>>()
        )));
    }

    let names: Vec<&str> = ia.iter().copied().collect();
    let pos_a: Vec<usize> = sa.frame_input_names().iter().map(|n| names.binary_search(n).unwrap()).collect();
    let pos_b: Vec<usize> = sb.frame_input_names().iter().map(|n| names.binary_search(n).unwrap()).collect();
    let ports: Vec<&FramePort> = pa.iter().copied().collect();
    let net_a: Vec<usize> = ports
        .iter()
        .map(|p| sa.frame_outputs.iter().find(|(q, _)| q == *p).unwrap().1)
        .collect();
    let net_b: Vec<usize> = ports
        .iter()
        .map(|p| sb.frame_outputs.iter().find(|(q, _)| q == *p).unwrap().1)
        .collect();

    let mut src = VectorSource::new(names.len(), mode)?;
    let mut words = vec![0u64; names.len()];
    let mut wa = vec![0u64; pos_a.len()];
    let mut wb = vec![0u64; pos_b.len()];
    let mut va = vec![0u64; sa.net_count()];
    let mut vb = vec![0u64; sb.net_count()];
    while let Some(mask) = src.next_chunk(&mut words) {
        for (w, &p) in wa.iter_mut().zip(&pos_a) {
            *w = words[p];
        }
        for (w, &p) in wb.iter_mut().zip(&pos_b) {
            *w = words[p];
        }
        sa.eval_into(&wa, &mut va);
        sb.eval_into(&wb, &mut vb);
        let diff = net_a
            .iter()
            .zip(&net_b)
            .fold(0u64, |acc, (&x, &y)| acc | (va[x] ^ vb[y]))
            & mask;
        if diff != 0 {
            let lane = diff.trailing_zeros();
            return Ok(Verdict::Counterexample(assignment_from_lane(&names, &words, lane)));
        }
    }
    Ok(Verdict::Equivalent)
}

/// Checks that `sub` computes the restriction of `reference` to a cone:
/// every frame input and primary output of `sub` names a net of
/// `reference`, and for every reference frame vector the sub-circuit fed
/// with the reference's values on its inputs reproduces the reference's
/// values on its outputs.
pub fn check_cone_equivalence(reference: &Netlist, sub: &Netlist, mode: EquivalenceMode) -> Result<Verdict, SimError> {
    let sr = Simulator::new(reference)?;
    let ss = Simulator::new(sub)?;
    let lookup = |n: &str| sr.net_index(n).ok_or_else(|| SimError::UnknownNet(n.to_string()));
    let sub_in: Vec<usize> = ss.frame_input_names().iter().map(|n| lookup(n)).collect::<Result<_, _>>()?;
    let mut out_pairs = Vec::new();
    for (p, net) in &ss.frame_outputs {
        let name = match p {
            FramePort::Output(n) => n.as_str(),
            FramePort::NextState(_) => ss.net_name(*net),
        };
        out_pairs.push((lookup(name)?, *net));
    }
    let names = sr.frame_input_names();
    let mut src = VectorSource::new(names.len(), mode)?;
    let mut words = vec![0u64; names.len()];
    let mut vr = vec![0u64; sr.net_count()];
    let mut vs = vec![0u64; ss.net_count()];
    let mut ws = vec![0u64; sub_in.len()];
    while let Some(mask) = src.next_chunk(&mut words) {
        sr.eval_into(&words, &mut vr);
        for (w, &n) in ws.iter_mut().zip(&sub_in) {
            *w = vr[n];
        }
        ss.eval_into(&ws, &mut vs);
        let diff = out_pairs.iter().fold(0u64, |acc, &(r, s)| acc | (vr[r] ^ vs[s])) & mask;
        if diff != 0 {
            let lane = diff.trailing_zeros();
            return Ok(Verdict::Counterexample(assignment_from_lane(&names, &words, lane)));
        }
    }
    Ok(Verdict::Equivalent)
}

/// Estimated probability of logic 1 per net under uniform random frame inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalProfile {
    pub probabilities: BTreeMap<String, f64>,
    pub n_vectors: usize,
    pub seed: u64,
}

impl SignalProfile {
    pub fn get(&self, net: &str) -> Option<f64> {
        self.probabilities.get(net).copied()
    }

    /// CSV `net,probability`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("net,probability\n");
        for (n, p) in &self.probabilities {
            s.push_str(&format!("{n},{p}\n"));
        }
        s
    }
}

fn count_ones(sim: &Simulator, mode: EquivalenceMode) -> Result<(Vec<u64>, u64), SimError> {
    let k = sim.frame_inputs.len();
    let mut src = VectorSource::new(k, mode)?;
    let mut words = vec![0u64; k];
    let mut values = vec![0u64; sim.net_count()];
    let mut ones = vec![0u64; sim.net_count()];
    let mut total = 0u64;
    while let Some(mask) = src.next_chunk(&mut words) {
        sim.eval_into(&words, &mut values);
        for (c, v) in ones.iter_mut().zip(&values) {
            *c += (v & mask).count_ones() as u64;
        }
        total += mask.count_ones() as u64;
    }
    Ok((ones, total))
}

/// Random vectors are drawn per 64-vector chunk, one word per frame input in
/// netlist frame-input order.
pub fn random_signal_profile(netlist: &Netlist, n_vectors: usize, seed: u64) -> Result<SignalProfile, SimError> {
    let n_vectors = n_vectors.max(1);
    let sim = Simulator::new(netlist)?;
    let (ones, total) = count_ones(&sim, EquivalenceMode::Random { n: n_vectors, seed })?;
    Ok(SignalProfile {
        probabilities: sim
            .names
            .iter()
            .zip(&ones)
            .map(|(n, &c)| (n.clone(), c as f64 / total as f64))
            .collect(),
        n_vectors,
        seed,
    })
}

/// Exact probabilities by enumeration (`k ≤ 24`).
pub fn exhaustive_signal_profile(netlist: &Netlist) -> Result<BTreeMap<String, f64>, SimError> {
    let sim = Simulator::new(netlist)?;
    let (ones, total) = count_ones(&sim, EquivalenceMode::Exhaustive)?;
    Ok(sim
        .names
        .iter()
        .zip(&ones)
        .map(|(n, &c)| (n.clone(), c as f64 / total as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    fn net(text: &str) -> Netlist {
        parse_bench(text).unwrap()
    }

    fn assign(pairs: &[(&str, bool)]) -> FrameAssignment {
        FrameAssignment(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    const C17: &str = "INPUT(1)\nINPUT(2)\nINPUT(3)\nINPUT(6)\nINPUT(7)\nOUTPUT(22)\nOUTPUT(23)\n\
        10 = NAND(1, 3)\n11 = NAND(3, 6)\n16 = NAND(2, 11)\n19 = NAND(11, 7)\n22 = NAND(10, 16)\n23 = NAND(16, 19)\n";

    #[test]
    fn and_truth_table() {
        let n = net("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n");
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let r = simulate(&n, &assign(&[("a", a), ("b", b)])).unwrap();
            assert_eq!(r.nets["y"], a && b);
        }
    }

    #[test]
    fn xor_chain_parity() {
        let n = net("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nt = XOR(a, b)\ny = XOR(t, c)\n");
        let r = simulate(&n, &assign(&[("a", true), ("b", true), ("c", true)])).unwrap();
        assert!(r.nets["y"]);
    }

    #[test]
    fn c17_hand_trace() {
        // 1=1 2=0 3=1 6=0 7=1:
        // 10 = !(1&3) = 0, 11 = !(3&6) = 1, 16 = !(2&11) = 1,
        // 19 = !(11&7) = 0, 22 = !(10&16) = 1, 23 = !(16&19) = 1.
        let r = simulate(
            &net(C17),
            &assign(&[("1", true), ("2", false), ("3", true), ("6", false), ("7", true)]),
        )
        .unwrap();
        let got: Vec<bool> = ["10", "11", "16", "19", "22", "23"].iter().map(|n| r.nets[*n]).collect();
        assert_eq!(got, vec![false, true, true, false, true, true]);
    }

    #[test]
    fn assignment_must_be_complete_and_exact() {
        let n = net("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n");
        assert_eq!(simulate(&n, &assign(&[("a", true)])), Err(SimError::Missing("b".into())));
        assert_eq!(
            simulate(&n, &assign(&[("a", true), ("b", true), ("z", true)])),
            Err(SimError::Extra("z".into()))
        );
    }

    #[test]
    fn dff_frame_semantics() {
        let n = net("INPUT(a)\nOUTPUT(y)\nq = DFF(d)\nd = XOR(a, q)\ny = NOT(q)\n");
        let r = simulate(&n, &assign(&[("a", true), ("q", true)])).unwrap();
        assert!(!r.nets["y"]);
        assert_eq!(r.next_state["q"], false);
        assert_eq!(r.port(&FramePort::NextState("q".into())), Some(false));
    }

    #[test]
    fn demorgan_identity_is_equivalent() {
        let a = net("INPUT(x)\nINPUT(y)\nOUTPUT(o)\no = AND(x, y)\n");
        let b = net("INPUT(x)\nINPUT(y)\nOUTPUT(o)\nt = NAND(x, y)\no = NOT(t)\n");
        assert_eq!(check_equivalence(&a, &b, EquivalenceMode::Exhaustive).unwrap(), Verdict::Equivalent);
    }

    #[test]
    fn and_vs_or_counterexample() {
        let a = net("INPUT(x)\nINPUT(y)\nOUTPUT(o)\no = AND(x, y)\n");
        let b = net("INPUT(x)\nINPUT(y)\nOUTPUT(o)\no = OR(x, y)\n");
        let v = check_equivalence(&a, &b, EquivalenceMode::Exhaustive).unwrap();
        assert_eq!(v, Verdict::Counterexample(assign(&[("x", true), ("y", false)])));
    }

    #[test]
    fn reflexive_and_symmetric() {
        let c = net(C17);
        assert!(check_equivalence(&c, &c, EquivalenceMode::Exhaustive).unwrap().is_equivalent());
        let mut d = c.clone();
        d.gates[3].kind = crate::netlist::GateKind::And;
        for mode in [EquivalenceMode::Exhaustive, EquivalenceMode::Random { n: 100, seed: 5 }] {
            let ab = check_equivalence(&c, &d, mode).unwrap();
            let ba = check_equivalence(&d, &c, mode).unwrap();
            assert_eq!(ab, ba);
            assert!(!ab.is_equivalent());
        }
    }

    #[test]
    fn next_state_mismatch_is_detected() {
        let a = net("INPUT(a)\nOUTPUT(y)\nq = DFF(d)\nd = AND(a, q)\ny = BUFF(q)\n");
        let b = net("INPUT(a)\nOUTPUT(y)\nq = DFF(d)\nd = OR(a, q)\ny = BUFF(q)\n");
        assert!(!check_equivalence(&a, &b, EquivalenceMode::Exhaustive).unwrap().is_equivalent());
    }

    #[test]
    fn interface_mismatch_and_limit() {
        let a = net("INPUT(x)\nOUTPUT(o)\no = NOT(x)\n");
        let b = net("INPUT(z)\nOUTPUT(o)\no = NOT(z)\n");
        assert!(matches!(check_equivalence(&a, &b, EquivalenceMode::Exhaustive), Err(SimError::InterfaceMismatch(_))));
        let mut wide = Netlist::new("wide");
        for i in 0..25 {
            wide.inputs.push(format!("i{i}"));
        }
        wide.outputs.push("i0".into());
        assert!(matches!(
            check_equivalence(&wide, &wide, EquivalenceMode::Exhaustive),
            Err(SimError::TooManyInputs { k: 25, .. })
        ));
    }

    #[test]
    fn exhaustive_covers_more_than_one_chunk() {
        // 8 inputs → 256 vectors → 4 chunks; the only difference is at vector 255.
        let mut a = Netlist::new("a");
        let mut b = Netlist::new("b");
        for i in 0..8 {
            a.inputs.push(format!("i{i}"));
            b.inputs.push(format!("i{i}"));
        }
        let ins = ["i0", "i1", "i2", "i3", "i4", "i5", "i6", "i7"];
        a.gates.push(crate::netlist::Gate::new("o", GateKind::And, &ins));
        a.outputs.push("o".into());
        b.gates.push(crate::netlist::Gate::new("o", GateKind::Xor, &["i0", "i0"]));
        b.outputs.push("o".into());
        match check_equivalence(&a, &b, EquivalenceMode::Exhaustive).unwrap() {
            Verdict::Counterexample(cx) => assert!(cx.0.values().all(|&v| v)),
            Verdict::Equivalent => panic!("missed the all-ones vector"),
        }
    }

    #[test]
    fn profile_of_primary_input_is_half() {
        let n = net("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n");
        let p = random_signal_profile(&n, 10_000, 1).unwrap();
        assert!((p.get("a").unwrap() - 0.5).abs() < 0.02);
        assert_eq!(p.n_vectors, 10_000);
    }

    #[test]
    fn profile_of_four_input_and() {
        let n = net("INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nOUTPUT(y)\ny = AND(a, b, c, d)\n");
        let exact = exhaustive_signal_profile(&n).unwrap();
        assert_eq!(exact["y"], 1.0 / 16.0);
        let p = random_signal_profile(&n, 10_000, 9).unwrap();
        assert!((p.get("y").unwrap() - 0.0625).abs() < 0.01);
    }

    #[test]
    fn xor_of_self_is_constant_zero() {
        let n = net("INPUT(a)\nOUTPUT(y)\ny = XOR(a, a)\n");
        assert_eq!(random_signal_profile(&n, 1000, 3).unwrap().get("y"), Some(0.0));
    }

    #[test]
    fn profile_is_deterministic_and_converges() {
        let n = net(C17);
        let p1 = random_signal_profile(&n, 5000, 77).unwrap();
        let p2 = random_signal_profile(&n, 5000, 77).unwrap();
        assert_eq!(p1, p2);
        let exact = exhaustive_signal_profile(&n).unwrap();
        let big = random_signal_profile(&n, 200_000, 78).unwrap();
        for (k, v) in &exact {
            assert!((big.get(k).unwrap() - v).abs() < 0.01, "{k}");
        }
        assert!(p1.to_csv().starts_with("net,probability\n"));
    }

    #[test]
    fn cone_restriction_check() {
        let full = net(C17);
        let cone = net("INPUT(1)\nINPUT(3)\nINPUT(16)\nOUTPUT(22)\n10 = NAND(1, 3)\n22 = NAND(10, 16)\n");
        assert!(check_cone_equivalence(&full, &cone, EquivalenceMode::Exhaustive).unwrap().is_equivalent());
        let wrong = net("INPUT(1)\nINPUT(3)\nINPUT(16)\nOUTPUT(22)\n10 = AND(1, 3)\n22 = NAND(10, 16)\n");
        assert!(!check_cone_equivalence(&full, &wrong, EquivalenceMode::Exhaustive).unwrap().is_equivalent());
    }

    #[test]
    fn compact_assignment_round_trip() {
        let a = assign(&[("x", true), ("y", false)]);
        assert_eq!(a.to_compact(), "x=1;y=0");
        assert_eq!(FrameAssignment::from_compact(&a.to_compact()), Some(a));
    }
}
