// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet};

use super::AugmentError;
use crate::netlist::{Driver, Gate, GateKind, Netlist};
use crate::rng::{derive_seed, SplitMix64};
use crate::sim::{EquivalenceMode, FrameAssignment, SignalProfile, SimError, Simulator, VectorSource};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrojanConfig {
    /// A net is rare when the probability of its rarer value is below this.
    pub rarity_threshold: f64,
    /// Trigger sets whose measured firing rate exceeds
    /// `min(rarity_threshold^width, max_fire_rate)` are rejected.
    pub max_fire_rate: f64,
    /// Random vectors sampled to assemble triggers and measure firing rates.
    pub fire_vectors: usize,
    /// Triggers are drawn from the `pool_factor · width` rarest nets.
    pub pool_factor: usize,
    /// Trigger sets tried before giving up.
    pub retries: usize,
    /// Victim/branch choices tried per trigger set.
    pub victims_per_trigger: usize,
}

impl Default for TrojanConfig {
    fn default() -> Self {
        Self {
            rarity_threshold: 0.2,
            max_fire_rate: 0.002,
            fire_vectors: 16_384,
            pool_factor: 8,
            retries: 64,
            victims_per_trigger: 8,
        }
    }
}

/// Which fan-out branch of the victim carries the flipped value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadBranch {
    /// The victim is a primary output; the port sees the flipped value.
    Output,
    /// Input `pin` of gate `gate` (anchor index) reads the flipped value.
    Pin { gate: usize, pin: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrojanPlan {
    pub trigger_nets: Vec<String>,
    /// Value each trigger net must take for the trigger to fire.
    pub polarity: Vec<bool>,
    pub victim: String,
    pub branch: PayloadBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrojanInfo {
    pub trigger_nets: Vec<String>,
    pub trigger_polarity: Vec<bool>,
    pub trigger_width: usize,
    pub payload_net: String,
    pub branch: PayloadBranch,
    /// Output net of the AND tree.
    pub trigger_root: String,
    /// Output nets of every inserted gate, in insertion order.
    pub inserted_gates: Vec<String>,
    /// Fires the trigger and makes at least one frame output differ from the anchor.
    pub activating_assignment: FrameAssignment,
    pub fire_rate: f64,
}

/// Transitive combinational fan-in of `nets`, including the nets themselves.
/// State nets are included but not expanded.
pub fn fan_in_cone(netlist: &Netlist, nets: &[&str]) -> HashSet<String> {
    let drivers = netlist.drivers();
    let mut cone = HashSet::new();
    let mut stack: Vec<&str> = nets.to_vec();
    while let Some(n) = stack.pop() {
        if !cone.insert(n.to_string()) {
            continue;
        }
        if let Some(&Driver::Gate(g)) = drivers.get(n) {
            if netlist.gates[g].kind != GateKind::Dff {
                stack.extend(netlist.gates[g].inputs.iter().map(String::as_str));
            }
        }
    }
    cone
}

/// Inserts the trigger tree and payload described by `plan`. Returns the
/// Trojaned netlist, the inserted gate outputs and the trigger root net.
pub fn build_trojan(netlist: &Netlist, plan: &TrojanPlan) -> Result<(Netlist, Vec<String>, String), AugmentError> {
    let bad = |m: String| Err(AugmentError::BadPlan(m));
    if plan.trigger_nets.is_empty() || plan.trigger_nets.len() != plan.polarity.len() {
        return bad("trigger nets and polarities must be non-empty and aligned".into());
    }
    let drivers = netlist.drivers();
    let distinct: HashSet<&String> = plan.trigger_nets.iter().collect();
    if distinct.len() != plan.trigger_nets.len() {
        return bad("trigger nets must be distinct".into());
    }
    if let Some(n) = plan.trigger_nets.iter().find(|n| !drivers.contains_key(n.as_str())) {
        return bad(format!("trigger net `{n}` does not exist"));
    }
    let victim_gate = match drivers.get(plan.victim.as_str()) {
        Some(&Driver::Gate(g)) => g,
        _ => return bad(format!("victim `{}` is not driven by a gate", plan.victim)),
    };
    let triggers: Vec<&str> = plan.trigger_nets.iter().map(String::as_str).collect();
    if fan_in_cone(netlist, &triggers).contains(&plan.victim) {
        return bad(format!("victim `{}` feeds the trigger", plan.victim));
    }
    match plan.branch {
        PayloadBranch::Output if !netlist.outputs.contains(&plan.victim) => {
            return bad(format!("victim `{}` is not a primary output", plan.victim))
        }
        PayloadBranch::Pin { gate, pin }
            if netlist.gates.get(gate).and_then(|g| g.inputs.get(pin)) != Some(&plan.victim) =>
        {
            return bad(format!("gate {gate} pin {pin} does not read `{}`", plan.victim))
        }
        _ => {}
    }

    let mut out = netlist.clone();
    let mut taken: HashSet<String> = HashSet::new();
    let mut fresh = |out: &Netlist| {
        let n = out.fresh_net("w", &taken);
        taken.insert(n.clone());
        n
    };
    let mut inserted = Vec::new();
    let mut level: Vec<String> = Vec::new();
    for (net, &pol) in plan.trigger_nets.iter().zip(&plan.polarity) {
        if pol {
            level.push(net.clone());
        } else {
            let n = fresh(&out);
            out.gates.push(Gate::new(n.clone(), GateKind::Not, &[net]));
            inserted.push(n.clone());
            level.push(n);
        }
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            if let [a, b] = pair {
                let n = fresh(&out);
                out.gates.push(Gate::new(n.clone(), GateKind::And, &[a, b]));
                inserted.push(n.clone());
                next.push(n);
            } else {
                next.push(pair[0].clone());
            }
        }
        level = next;
    }
    let root = level.pop().expect("non-empty trigger");

    match plan.branch {
        PayloadBranch::Pin { gate, pin } => {
            let p = fresh(&out);
            out.gates.push(Gate::new(p.clone(), GateKind::Xor, &[&plan.victim, &root]));
            inserted.push(p.clone());
            out.gates[gate].inputs[pin] = p;
        }
        PayloadBranch::Output => {
            let pre = fresh(&out);
            out.gates[victim_gate].output = pre.clone();
            for g in out.gates.iter_mut() {
                for i in g.inputs.iter_mut() {
                    if *i == plan.victim {
                        *i = pre.clone();
                    }
                }
            }
            out.gates.push(Gate::new(plan.victim.clone(), GateKind::Xor, &[&pre, &root]));
            inserted.push(plan.victim.clone());
        }
    }
    Ok((out, inserted, root))
}

/// Fraction of `n_vectors` seeded random frame vectors on which every
/// trigger net takes its required value.
pub fn trigger_fire_rate(
    netlist: &Netlist,
    nets: &[String],
    polarity: &[bool],
    n_vectors: usize,
    seed: u64,
) -> Result<f64, AugmentError> {
    let sim = Simulator::new(netlist)?;
    let idx: Vec<usize> = nets
        .iter()
        .map(|n| sim.net_index(n).ok_or_else(|| SimError::UnknownNet(n.clone())))
        .collect::<Result<_, _>>()?;
    let k = sim.frame_input_names().len();
    let mut src = VectorSource::new(k, EquivalenceMode::Random { n: n_vectors, seed })?;
    let mut words = vec![0u64; k];
    let mut values = vec![0u64; sim.net_count()];
    let mut fired = 0u64;
    while let Some(mask) = src.next_chunk(&mut words) {
        sim.eval_into(&words, &mut values);
        let hit = idx
            .iter()
            .zip(polarity)
            .fold(mask, |acc, (&i, &p)| acc & if p { values[i] } else { !values[i] });
        fired += hit.count_ones() as u64;
    }
    Ok(fired as f64 / n_vectors.max(1) as f64)
}

/// A seeded sample of frame vectors, kept packed per 64-vector chunk.
struct VectorSample {
    /// `frames[c][i]`: word of frame input `i` in chunk `c`.
    frames: Vec<Vec<u64>>,
    masks: Vec<u64>,
    n: usize,
}

impl VectorSample {
    fn draw(k: usize, n: usize, seed: u64) -> Result<Self, SimError> {
        let mut src = VectorSource::new(k, EquivalenceMode::Random { n, seed })?;
        let mut frames = Vec::new();
        let mut masks = Vec::new();
        let mut words = vec![0u64; k];
        while let Some(mask) = src.next_chunk(&mut words) {
            frames.push(words.clone());
            masks.push(mask);
        }
        Ok(Self { frames, masks, n })
    }

    /// Packs up to 64 selected vectors (`bits[c]` marks lanes of chunk `c`)
    /// into one chunk; returns the words and the lane mask.
    fn gather(&self, bits: &[u64]) -> (Vec<u64>, u64) {
        let k = self.frames.first().map_or(0, Vec::len);
        let mut words = vec![0u64; k];
        let mut lane = 0u32;
        'outer: for (c, &b) in bits.iter().enumerate() {
            let mut b = b;
            while b != 0 {
                if lane == 64 {
                    break 'outer;
                }
                let l = b.trailing_zeros();
                b &= b - 1;
                for (w, f) in words.iter_mut().zip(&self.frames[c]) {
                    *w |= ((f >> l) & 1) << lane;
                }
                lane += 1;
            }
        }
        let mask = if lane == 64 { !0 } else { (1u64 << lane) - 1 };
        (words, mask)
    }
}

fn popcount(bits: &[u64]) -> u64 {
    bits.iter().map(|b| b.count_ones() as u64).sum()
}

/// Injects a rare-trigger Trojan: `trigger_width` rare nets (each at its
/// rarer value) feed an AND tree whose output is XORed into one fan-out
/// branch of a victim net outside the trigger's fan-in cone.
///
/// Triggers are assembled on a seeded sample of frame vectors: each added
/// net must keep at least one sampled vector satisfying all literals, and
/// the final firing rate must not exceed `min(threshold^width, max_fire_rate)`.
/// The sampled activating vectors are then searched for one on which the
/// payload reaches a frame output.
pub fn inject_trojan(
    netlist: &Netlist,
    seed: u64,
    trigger_width: usize,
    profile: &SignalProfile,
    cfg: &TrojanConfig,
) -> Result<(Netlist, TrojanInfo), AugmentError> {
    if !(2..=6).contains(&trigger_width) {
        return Err(AugmentError::TriggerWidth(trigger_width));
    }
    let nets = netlist.nets();
    let mut rare: Vec<(f64, usize, bool)> = nets
        .iter()
        .enumerate()
        .filter_map(|(i, n)| {
            let p = profile.get(n)?;
            let (q, pol) = if p < 0.5 { (p, true) } else { (1.0 - p, false) };
            (q > 0.0 && q < cfg.rarity_threshold).then_some((q, i, pol))
        })
        .collect();
    rare.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if rare.len() < trigger_width {
        return Err(AugmentError::NotEnoughRareNets {
            need: trigger_width,
            found: rare.len(),
        });
    }
    let pool = &rare[..rare.len().min(trigger_width * cfg.pool_factor.max(1))];
    let bound = cfg.rarity_threshold.powi(trigger_width as i32).min(cfg.max_fire_rate);

    let sim = Simulator::new(netlist)?;
    let sample = VectorSample::draw(sim.frame_input_names().len(), cfg.fire_vectors.max(1), derive_seed(seed, 1))?;
    // Literal bits of every pool net over the sample.
    let mut lit: Vec<Vec<u64>> = vec![Vec::with_capacity(sample.frames.len()); pool.len()];
    let mut values = vec![0u64; sim.net_count()];
    for (frame, &mask) in sample.frames.iter().zip(&sample.masks) {
        sim.eval_into(frame, &mut values);
        for (bits, &(_, ni, pol)) in lit.iter_mut().zip(pool) {
            let v = values[sim.net_index(nets[ni]).expect("pool net")];
            bits.push(if pol { v } else { !v } & mask);
        }
    }

    let consumers = netlist.consumers();
    let victims: Vec<usize> = (0..netlist.gates.len())
        .filter(|&g| netlist.gates[g].kind != GateKind::Dff)
        .collect();
    let mut rng = SplitMix64::new(seed);
    for _ in 0..cfg.retries {
        let order = rng.permutation(pool.len());
        let mut chosen: Vec<usize> = Vec::with_capacity(trigger_width);
        let mut joint: Vec<u64> = Vec::new();
        for &c in &order {
            if chosen.len() == trigger_width {
                break;
            }
            if chosen.iter().any(|&o| lit[o] == lit[c]) {
                continue;
            }
            let next: Vec<u64> = if chosen.is_empty() {
                lit[c].clone()
            } else {
                joint.iter().zip(&lit[c]).map(|(a, b)| a & b).collect()
            };
            if popcount(&next) > 0 {
                chosen.push(c);
                joint = next;
            }
        }
        let hits = popcount(&joint);
        let fire_rate = hits as f64 / sample.n as f64;
        if chosen.len() < trigger_width || fire_rate > bound {
            continue;
        }
        chosen.sort_unstable();
        let trigger_nets: Vec<String> = chosen.iter().map(|&c| nets[pool[c].1].to_string()).collect();
        let polarity: Vec<bool> = chosen.iter().map(|&c| pool[c].2).collect();
        let refs: Vec<&str> = trigger_nets.iter().map(String::as_str).collect();
        let cone = fan_in_cone(netlist, &refs);
        let open: Vec<usize> = victims
            .iter()
            .copied()
            .filter(|&g| !cone.contains(&netlist.gates[g].output))
            .collect();
        let (words, mask) = sample.gather(&joint);

        for _ in 0..cfg.victims_per_trigger {
            let Some(&vg) = rng.choose(&open) else { break };
            let victim = netlist.gates[vg].output.clone();
            let mut branches = Vec::new();
            if netlist.outputs.contains(&victim) {
                branches.push(PayloadBranch::Output);
            }
            for &g in consumers.get(victim.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
                for (pin, i) in netlist.gates[g].inputs.iter().enumerate() {
                    if *i == victim && !branches.contains(&PayloadBranch::Pin { gate: g, pin }) {
                        branches.push(PayloadBranch::Pin { gate: g, pin });
                    }
                }
            }
            let Some(&branch) = rng.choose(&branches) else { continue };
            let plan = TrojanPlan {
                trigger_nets: trigger_nets.clone(),
                polarity: polarity.clone(),
                victim,
                branch,
            };
            let (out, inserted, root) = build_trojan(netlist, &plan)?;
            let Some(witness) = observe(&sim, &out, &root, &words, mask)? else { continue };
            let info = TrojanInfo {
                trigger_width,
                trigger_nets: plan.trigger_nets,
                trigger_polarity: plan.polarity,
                payload_net: plan.victim,
                branch: plan.branch,
                trigger_root: root,
                inserted_gates: inserted,
                activating_assignment: witness,
                fire_rate,
            };
            return Ok((out, info));
        }
    }
    Err(AugmentError::NoObservableVictim(cfg.retries))
}

/// First lane of `words` on which `root` is 1 in `trojaned` and some frame
/// output differs from the anchor simulated by `sa`.
fn observe(
    sa: &Simulator,
    trojaned: &Netlist,
    root: &str,
    words: &[u64],
    mask: u64,
) -> Result<Option<FrameAssignment>, AugmentError> {
    let st = Simulator::new(trojaned)?;
    let port_t: HashMap<_, _> = st.frame_ports().into_iter().cloned().zip(st.frame_output_nets()).collect();
    let va = sa.eval(words);
    let vt = st.eval(words);
    let diff = sa
        .frame_ports()
        .into_iter()
        .zip(sa.frame_output_nets())
        .fold(0u64, |acc, (p, na)| acc | (va[na] ^ vt[port_t[p]]));
    let hit = diff & vt[st.net_index(root).expect("root net")] & mask;
    if hit == 0 {
        return Ok(None);
    }
    let lane = hit.trailing_zeros();
    Ok(Some(FrameAssignment(
        sa.frame_input_names()
            .iter()
            .zip(words)
            .map(|(n, w)| (n.to_string(), (w >> lane) & 1 == 1))
            .collect(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench, validate};
    use crate::sim::{random_signal_profile, simulate, FramePort};

    /// Two wide ANDs and a wide NOR give rare nets; `y`, `z` are outputs.
    const RARE: &str = "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nINPUT(e)\nINPUT(f)\nINPUT(g)\nINPUT(h)\n\
        OUTPUT(y)\nOUTPUT(z)\n\
        r1 = AND(a, b, c)\nr2 = AND(d, e, f)\nr3 = NOR(a, g, h)\nr4 = AND(b, e, h)\n\
        m = OR(a, d)\nn = XOR(g, h)\ny = NAND(m, n)\nk = OR(r1, r2)\nz = XOR(k, r3, r4)\n";

    fn outputs_of(n: &Netlist, fa: &FrameAssignment) -> Vec<(FramePort, bool)> {
        let r = simulate(n, fa).unwrap();
        let mut v: Vec<_> = n.outputs.iter().map(|o| (FramePort::Output(o.clone()), r.nets[o])).collect();
        v.extend(r.next_state.iter().map(|(k, &b)| (FramePort::NextState(k.clone()), b)));
        v
    }

    #[test]
    fn forced_trigger_flips_output() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = OR(c, a)\n").unwrap();
        let plan = TrojanPlan {
            trigger_nets: vec!["a".into(), "b".into()],
            polarity: vec![true, true],
            victim: "y".into(),
            branch: PayloadBranch::Output,
        };
        let (t, inserted, root) = build_trojan(&n, &plan).unwrap();
        assert!(validate(&t).is_empty());
        assert_eq!(inserted.len(), 2);
        let on = FrameAssignment([("a", true), ("b", true), ("c", false)].iter().map(|(k, v)| (k.to_string(), *v)).collect());
        let r = simulate(&t, &on).unwrap();
        assert!(r.nets[&root]);
        assert_eq!(r.nets["y"], !simulate(&n, &on).unwrap().nets["y"]);
    }

    #[test]
    fn zero_polarity_gets_an_inverter() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nOUTPUT(v)\nv = AND(a, b)\ny = OR(v, c)\n").unwrap();
        let plan = TrojanPlan {
            trigger_nets: vec!["a".into(), "c".into()],
            polarity: vec![false, true],
            victim: "v".into(),
            branch: PayloadBranch::Pin { gate: 1, pin: 0 },
        };
        let (t, inserted, _) = build_trojan(&n, &plan).unwrap();
        assert_eq!(inserted.len(), 3, "NOT, AND, XOR");
        // `v` itself is untouched; only the branch into `y` is flipped.
        let fa = FrameAssignment([("a", false), ("b", true), ("c", true)].iter().map(|(k, v)| (k.to_string(), *v)).collect());
        let good = simulate(&n, &fa).unwrap();
        let bad = simulate(&t, &fa).unwrap();
        assert_eq!(good.nets["v"], bad.nets["v"]);
        // c=1 keeps y=1 regardless; the flip is masked here.
        assert_eq!(good.nets["y"], bad.nets["y"]);
    }

    #[test]
    fn plan_validation() {
        let n = parse_bench(RARE).unwrap();
        let victim_in_cone = TrojanPlan {
            trigger_nets: vec!["k".into(), "r3".into()],
            polarity: vec![true, true],
            victim: "r1".into(),
            branch: PayloadBranch::Pin { gate: 7, pin: 0 },
        };
        assert!(matches!(build_trojan(&n, &victim_in_cone), Err(AugmentError::BadPlan(_))));
        let dup = TrojanPlan {
            trigger_nets: vec!["r1".into(), "r1".into()],
            polarity: vec![true, true],
            victim: "y".into(),
            branch: PayloadBranch::Output,
        };
        assert!(matches!(build_trojan(&n, &dup), Err(AugmentError::BadPlan(_))));
    }

    #[test]
    fn width_precondition() {
        let n = parse_bench(RARE).unwrap();
        let p = random_signal_profile(&n, 4096, 1).unwrap();
        let cfg = TrojanConfig::default();
        assert_eq!(inject_trojan(&n, 0, 1, &p, &cfg).unwrap_err(), AugmentError::TriggerWidth(1));
        assert_eq!(inject_trojan(&n, 0, 7, &p, &cfg).unwrap_err(), AugmentError::TriggerWidth(7));
    }

    #[test]
    fn no_rare_nets() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n").unwrap();
        let p = random_signal_profile(&n, 4096, 1).unwrap();
        assert!(matches!(
            inject_trojan(&n, 0, 2, &p, &TrojanConfig::default()),
            Err(AugmentError::NotEnoughRareNets { need: 2, found: 0 })
        ));
    }

    #[test]
    fn injection_is_sound_and_dormant() {
        let n = parse_bench(RARE).unwrap();
        let p = random_signal_profile(&n, 4096, 5).unwrap();
        let cfg = TrojanConfig {
            max_fire_rate: 0.02,
            ..TrojanConfig::default()
        };
        let mut found = 0;
        for seed in 0..6 {
            let Ok((t, info)) = inject_trojan(&n, seed, 2, &p, &cfg) else { continue };
            found += 1;
            assert!(validate(&t).is_empty());
            assert_eq!(info.trigger_width, 2);
            assert_eq!(t.inputs, n.inputs);
            assert_eq!(t.outputs, n.outputs);
            // Witness: trigger on and some frame output flipped.
            let w = &info.activating_assignment;
            assert!(simulate(&t, w).unwrap().nets[&info.trigger_root]);
            assert_ne!(outputs_of(&n, w), outputs_of(&t, w));
            // Dormant: on random vectors with the trigger off, outputs agree.
            let st = Simulator::new(&t).unwrap();
            let sa = Simulator::new(&n).unwrap();
            let root = st.net_index(&info.trigger_root).unwrap();
            let mut rng = SplitMix64::new(1234 + seed);
            let mut checked = 0;
            while checked < 1000 {
                let words: Vec<u64> = (0..n.inputs.len()).map(|_| rng.next_u64()).collect();
                let vt = st.eval(&words);
                let va = sa.eval(&words);
                let off = !vt[root];
                for o in &n.outputs {
                    let d = (vt[st.net_index(o).unwrap()] ^ va[sa.net_index(o).unwrap()]) & off;
                    assert_eq!(d, 0);
                }
                checked += off.count_ones();
            }
        }
        assert!(found > 0);
    }

    #[test]
    fn injection_is_deterministic() {
        let n = parse_bench(RARE).unwrap();
        let p = random_signal_profile(&n, 4096, 5).unwrap();
        let cfg = TrojanConfig {
            max_fire_rate: 0.02,
            ..TrojanConfig::default()
        };
        assert_eq!(inject_trojan(&n, 3, 2, &p, &cfg), inject_trojan(&n, 3, 2, &p, &cfg));
    }

    #[test]
    fn fan_in_cone_stops_at_state() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\nq = DFF(d)\nd = XOR(a, q)\ny = NOT(d)\n").unwrap();
        let cone = fan_in_cone(&n, &["y"]);
        let mut v: Vec<_> = cone.into_iter().collect();
        v.sort();
        assert_eq!(v, vec!["a", "d", "q", "y"]);
    }
}
