// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use super::AugmentError;
use crate::netlist::{Gate, GateKind, Netlist};
use crate::rng::SplitMix64;

/// The inner gate kind for `kind → NOT ∘ inner`, if `kind` has a rule.
fn inner_kind(kind: GateKind) -> Option<GateKind> {
    match kind {
        GateKind::And => Some(GateKind::Nand),
        GateKind::Or => Some(GateKind::Nor),
        GateKind::Nand => Some(GateKind::And),
        GateKind::Nor => Some(GateKind::Or),
        GateKind::Xor => Some(GateKind::Xnor),
        GateKind::Xnor => Some(GateKind::Xor),
        GateKind::Buff => Some(GateKind::Not),
        GateKind::Not | GateKind::Dff => None,
    }
}

pub fn is_rewritable(kind: GateKind) -> bool {
    inner_kind(kind).is_some()
}

/// Rewrites gate `index` as its complement followed by a NOT. The output
/// net keeps its name; the complement drives a fresh internal net.
pub fn demorgan_rewrite_at(netlist: &Netlist, index: usize) -> Result<Netlist, AugmentError> {
    let gate = netlist.gates.get(index).ok_or(AugmentError::NotRewritable(index))?;
    let inner = inner_kind(gate.kind).ok_or(AugmentError::NotRewritable(index))?;
    let mid = netlist.fresh_net(&format!("{}_dm", gate.output), &HashSet::new());
    let mut out = netlist.clone();
    let first = Gate {
        output: mid.clone(),
        kind: inner,
        inputs: gate.inputs.clone(),
    };
    let second = Gate::new(gate.output.clone(), GateKind::Not, &[&mid]);
    out.gates.splice(index..=index, [first, second]);
    Ok(out)
}

/// Applies `count` rewrites at uniformly chosen rewritable gates. Gates
/// created by earlier rewrites are eligible for later ones.
pub fn demorgan_rewrite(netlist: &Netlist, seed: u64, count: usize) -> Result<Netlist, AugmentError> {
    if count == 0 {
        return Err(AugmentError::ZeroCount);
    }
    let mut rng = SplitMix64::new(seed);
    let mut cur = netlist.clone();
    for _ in 0..count {
        let sites: Vec<usize> = (0..cur.gates.len()).filter(|&g| is_rewritable(cur.gates[g].kind)).collect();
        let &site = rng
            .choose(&sites)
            .ok_or_else(|| AugmentError::NoRewritableGate(netlist.name.clone()))?;
        cur = demorgan_rewrite_at(&cur, site)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;
    use crate::sim::{check_equivalence, EquivalenceMode};

    fn exhaustive_eq(a: &Netlist, b: &Netlist) -> bool {
        check_equivalence(a, b, EquivalenceMode::Exhaustive).unwrap().is_equivalent()
    }

    #[test]
    fn single_and_becomes_nand_then_not() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        let r = demorgan_rewrite(&n, 1, 1).unwrap();
        assert_eq!(r.gates.len(), 2);
        assert_eq!(r.gates[0].kind, GateKind::Nand);
        assert_eq!(r.gates[0].inputs, vec!["a", "b"]);
        assert_eq!(r.gates[1], Gate::new("y", GateKind::Not, &[&r.gates[0].output]));
        assert!(exhaustive_eq(&n, &r));
    }

    #[test]
    fn zero_count_is_rejected() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        assert_eq!(demorgan_rewrite(&n, 1, 0), Err(AugmentError::ZeroCount));
    }

    #[test]
    fn nothing_to_rewrite() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n").unwrap();
        assert!(matches!(demorgan_rewrite(&n, 1, 1), Err(AugmentError::NoRewritableGate(_))));
    }

    #[test]
    fn twice_at_the_same_site() {
        // First pass: AND → NAND + NOT. Second pass on the NAND: NAND → AND + NOT.
        // Two gates are created per pass (four in total) and one replaced each time.
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        let once = demorgan_rewrite_at(&n, 0).unwrap();
        let twice = demorgan_rewrite_at(&once, 0).unwrap();
        let created: usize = 2 + 2;
        assert_eq!(twice.gates.len(), n.gates.len() + created - 2);
        let kinds: Vec<GateKind> = twice.gates.iter().map(|g| g.kind).collect();
        assert_eq!(kinds, vec![GateKind::And, GateKind::Not, GateKind::Not]);
        assert!(exhaustive_eq(&n, &twice));
    }

    #[test]
    fn every_rule_preserves_function() {
        for kind in ["AND", "OR", "NAND", "NOR", "XOR", "XNOR"] {
            let n = parse_bench(&format!("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = {kind}(a, b, c)\n")).unwrap();
            let r = demorgan_rewrite_at(&n, 0).unwrap();
            assert!(exhaustive_eq(&n, &r), "{kind}");
        }
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = BUFF(a)\n").unwrap();
        let r = demorgan_rewrite_at(&n, 0).unwrap();
        assert_eq!(r.gates[0].kind, GateKind::Not);
        assert!(exhaustive_eq(&n, &r));
    }

    #[test]
    fn many_rewrites_on_a_sequential_circuit() {
        let n = parse_bench(
            "INPUT(a)\nINPUT(b)\nOUTPUT(y)\nq = DFF(d)\nd = XOR(a, q)\nt = OR(a, b)\ny = NAND(t, q)\n",
        )
        .unwrap();
        for seed in 0..20 {
            let r = demorgan_rewrite(&n, seed, 5).unwrap();
            assert_eq!(r.gates.len(), n.gates.len() + 5);
            assert!(exhaustive_eq(&n, &r));
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(z)\ny = AND(a, b)\nz = OR(a, y)\n").unwrap();
        assert_eq!(demorgan_rewrite(&n, 9, 3).unwrap(), demorgan_rewrite(&n, 9, 3).unwrap());
    }
}
