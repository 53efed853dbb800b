// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet, VecDeque};

use super::AugmentError;
use crate::netlist::{Driver, GateKind, Netlist};
use crate::rng::SplitMix64;

/// Extracts the breadth-first fan-in cone of a randomly chosen frame output,
/// stopping after `max_nodes` gates. Nets on the cut (and state nets) become
/// primary inputs; the chosen net is the single primary output. Net names are
/// kept, so the result can be checked against the anchor net by net.
pub fn extract_subcircuit(netlist: &Netlist, seed: u64, max_nodes: usize) -> Result<Netlist, AugmentError> {
    if max_nodes < 3 {
        return Err(AugmentError::MaxNodesTooSmall(max_nodes));
    }
    let drivers = netlist.drivers();
    let comb_gate = |net: &str| match drivers.get(net) {
        Some(&Driver::Gate(g)) if netlist.gates[g].kind != GateKind::Dff => Some(g),
        _ => None,
    };

    // Frame outputs driven by a combinational gate, deduplicated, in port order.
    let mut roots: Vec<&str> = Vec::new();
    let dff_d = netlist
        .gates
        .iter()
        .filter(|g| g.kind == GateKind::Dff)
        .map(|g| g.inputs[0].as_str());
    for net in netlist.outputs.iter().map(String::as_str).chain(dff_d) {
        if comb_gate(net).is_some() && !roots.contains(&net) {
            roots.push(net);
        }
    }
    let mut rng = SplitMix64::new(seed);
    let &root = rng.choose(&roots).ok_or_else(|| AugmentError::NoGates(netlist.name.clone()))?;

    let mut included: HashSet<usize> = HashSet::new();
    let mut cut: HashSet<&str> = HashSet::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut queue = VecDeque::from([root]);
    seen.insert(root);
    while let Some(net) = queue.pop_front() {
        match comb_gate(net) {
            Some(g) if included.len() < max_nodes => {
                included.insert(g);
                for i in &netlist.gates[g].inputs {
                    if seen.insert(i.as_str()) {
                        queue.push_back(i.as_str());
                    }
                }
            }
            _ => {
                cut.insert(net);
            }
        }
    }

    // Inputs follow the anchor's net declaration order.
    let order: HashMap<&str, usize> = netlist.nets().into_iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut inputs: Vec<&str> = cut.into_iter().collect();
    inputs.sort_by_key(|n| order.get(n).copied().unwrap_or(usize::MAX));

    let mut out = Netlist::new(format!("{}_x", netlist.name));
    out.inputs = inputs.into_iter().map(String::from).collect();
    out.outputs = vec![root.to_string()];
    out.gates = (0..netlist.gates.len())
        .filter(|g| included.contains(g))
        .map(|g| netlist.gates[g].clone())
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench, validate, Gate};
    use crate::sim::{check_cone_equivalence, EquivalenceMode, Simulator};

    #[test]
    fn one_gate_circuit_is_a_fixed_point() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        for seed in 0..4 {
            assert!(extract_subcircuit(&n, seed, 3).unwrap().structure_eq(&n));
        }
    }

    #[test]
    fn large_budget_takes_the_full_cone() {
        let n = parse_bench(
            "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nt = AND(a, b)\nu = OR(t, c)\ny = NOT(u)\n",
        )
        .unwrap();
        let x = extract_subcircuit(&n, 0, 100).unwrap();
        assert!(x.structure_eq(&n));
    }

    #[test]
    fn small_budget_promotes_cut_nets() {
        // A 20-gate chain with side inputs: g_k = AND/OR(g_{k-1}, i_k).
        let mut n = Netlist::new("chain");
        for k in 0..21 {
            n.inputs.push(format!("i{k}"));
        }
        let mut prev = "i0".to_string();
        for k in 1..=20 {
            let out = format!("g{k}");
            let kind = if k % 2 == 0 { GateKind::And } else { GateKind::Or };
            n.gates.push(Gate::new(out.clone(), kind, &[&prev, &format!("i{k}")]));
            prev = out;
        }
        n.outputs.push(prev);
        assert!(validate(&n).is_empty());

        let x = extract_subcircuit(&n, 3, 8).unwrap();
        assert!(x.gates.len() <= 8);
        assert!(validate(&x).is_empty());
        assert!(x.inputs.contains(&"g12".to_string()), "cut net becomes an input: {:?}", x.inputs);

        // Independent check: drive the anchor with 1000 seeded vectors and
        // feed the sub-circuit the anchor's values on its inputs.
        let sa = Simulator::new(&n).unwrap();
        let sx = Simulator::new(&x).unwrap();
        let mut rng = SplitMix64::new(99);
        for _ in 0..(1000 / 64 + 1) {
            let words: Vec<u64> = (0..n.inputs.len()).map(|_| rng.next_u64()).collect();
            let va = sa.eval(&words);
            let wx: Vec<u64> = x.inputs.iter().map(|i| va[sa.net_index(i).unwrap()]).collect();
            let vx = sx.eval(&wx);
            assert_eq!(vx[sx.net_index("g20").unwrap()], va[sa.net_index("g20").unwrap()]);
        }
        assert!(check_cone_equivalence(&n, &x, EquivalenceMode::Random { n: 1000, seed: 1 })
            .unwrap()
            .is_equivalent());
    }

    #[test]
    fn sequential_root_and_state_cut() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\nq = DFF(d)\nd = XOR(a, q)\ny = NOT(q)\n").unwrap();
        for seed in 0..8 {
            let x = extract_subcircuit(&n, seed, 5).unwrap();
            assert!(validate(&x).is_empty());
            assert!(!x.is_sequential());
            assert!(check_cone_equivalence(&n, &x, EquivalenceMode::Exhaustive).unwrap().is_equivalent());
        }
    }

    #[test]
    fn errors() {
        let n = parse_bench("INPUT(a)\nOUTPUT(a)\n").unwrap();
        assert!(matches!(extract_subcircuit(&n, 0, 5), Err(AugmentError::NoGates(_))));
        assert_eq!(extract_subcircuit(&n, 0, 2), Err(AugmentError::MaxNodesTooSmall(2)));
    }
}
