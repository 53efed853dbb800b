// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{GateKind, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    NoInterface,
    Arity,
    DuplicateDriver,
    UndrivenNet,
    UndrivenOutput,
    CombinationalCycle,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::NoInterface => "no primary inputs/outputs",
            Rule::Arity => "arity",
            Rule::DuplicateDriver => "duplicate driver",
            Rule::UndrivenNet => "undriven net",
            Rule::UndrivenOutput => "undriven output",
            Rule::CombinationalCycle => "combinational cycle",
        })
    }
}

/// One broken invariant. `subject` is the offending net; `gate` the gate index when one applies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub subject: String,
    pub gate: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: `{}`", self.rule, self.subject)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Checks every netlist invariant. An empty report means the netlist is valid.
pub fn validate(netlist: &Netlist) -> Vec<Violation> {
    let mut out = Vec::new();
    if netlist.inputs.is_empty() || netlist.outputs.is_empty() {
        out.push(Violation {
            rule: Rule::NoInterface,
            subject: netlist.name.clone(),
            gate: None,
            detail: String::new(),
        });
    }

    for (gi, g) in netlist.gates.iter().enumerate() {
        if !g.kind.arity_ok(g.inputs.len()) {
            out.push(Violation {
                rule: Rule::Arity,
                subject: g.output.clone(),
                gate: Some(gi),
                detail: format!("{} with {} inputs", g.kind, g.inputs.len()),
            });
        }
    }

    let mut driven: HashSet<&str> = HashSet::new();
    for n in &netlist.inputs {
        if !driven.insert(n) {
            out.push(Violation {
                rule: Rule::DuplicateDriver,
                subject: n.clone(),
                gate: None,
                detail: "declared as input twice".into(),
            });
        }
    }
    for (gi, g) in netlist.gates.iter().enumerate() {
        if !driven.insert(&g.output) {
            out.push(Violation {
                rule: Rule::DuplicateDriver,
                subject: g.output.clone(),
                gate: Some(gi),
                detail: String::new(),
            });
        }
    }

    let mut reported: HashSet<&str> = HashSet::new();
    for (gi, g) in netlist.gates.iter().enumerate() {
        for i in &g.inputs {
            if !driven.contains(i.as_str()) && reported.insert(i) {
                out.push(Violation {
                    rule: Rule::UndrivenNet,
                    subject: i.clone(),
                    gate: Some(gi),
                    detail: format!("read by `{}`", g.output),
                });
            }
        }
    }
    for o in &netlist.outputs {
        if !driven.contains(o.as_str()) {
            out.push(Violation {
                rule: Rule::UndrivenOutput,
                subject: o.clone(),
                gate: None,
                detail: String::new(),
            });
        }
    }

    if let Some(nets) = combinational_cycle(netlist) {
        out.push(Violation {
            rule: Rule::CombinationalCycle,
            subject: nets[0].clone(),
            gate: None,
            detail: nets.join(", "),
        });
    }
    out
}

/// Gates that lie on (or between) combinational cycles, as output net names
/// in gate order. Edges leaving DFF outputs are excluded.
fn combinational_cycle(netlist: &Netlist) -> Option<Vec<String>> {
    let n = netlist.gates.len();
    let mut driver: HashMap<&str, usize> = HashMap::new();
    for (gi, g) in netlist.gates.iter().enumerate() {
        driver.entry(g.output.as_str()).or_insert(gi);
    }
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (gi, g) in netlist.gates.iter().enumerate() {
        for i in &g.inputs {
            if let Some(&d) = driver.get(i.as_str()) {
                if netlist.gates[d].kind != GateKind::Dff {
                    succ[d].push(gi);
                    indeg[gi] += 1;
                }
            }
        }
    }
    let mut alive = vec![true; n];
    let mut stack: Vec<usize> = (0..n).filter(|&g| indeg[g] == 0).collect();
    while let Some(g) = stack.pop() {
        alive[g] = false;
        for &s in &succ[g] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                stack.push(s);
            }
        }
    }
    if alive.iter().all(|a| !a) {
        return None;
    }
    // Peel gates downstream of the cycle that lead nowhere cyclic.
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (d, ss) in succ.iter().enumerate() {
        for &s in ss {
            if alive[d] && alive[s] {
                pred[s].push(d);
            }
        }
    }
    let mut live_out = vec![0usize; n];
    for (d, ss) in succ.iter().enumerate() {
        if alive[d] {
            live_out[d] = ss.iter().filter(|&&s| alive[s]).count();
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&g| alive[g] && live_out[g] == 0).collect();
    while let Some(g) = stack.pop() {
        alive[g] = false;
        for &p in &pred[g] {
            if alive[p] {
                live_out[p] -= 1;
                if live_out[p] == 0 {
                    stack.push(p);
                }
            }
        }
    }
    Some(
        (0..n)
            .filter(|&g| alive[g])
            .map(|g| netlist.gates[g].output.clone())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench_unchecked, Gate};

    fn rules(text: &str) -> Vec<Rule> {
        validate(&parse_bench_unchecked(text).unwrap())
            .into_iter()
            .map(|v| v.rule)
            .collect()
    }

    #[test]
    fn valid_c17_style_netlist_is_clean() {
        let text = "INPUT(1)\nINPUT(2)\nINPUT(3)\nINPUT(6)\nINPUT(7)\nOUTPUT(22)\nOUTPUT(23)\n\
            10 = NAND(1, 3)\n11 = NAND(3, 6)\n16 = NAND(2, 11)\n19 = NAND(11, 7)\n22 = NAND(10, 16)\n23 = NAND(16, 19)\n";
        assert!(rules(text).is_empty());
    }

    #[test]
    fn duplicate_driver_reported_once() {
        let v = validate(
            &parse_bench_unchecked("INPUT(a)\nINPUT(b)\nOUTPUT(x)\nx = AND(a, b)\nx = OR(a, b)\n").unwrap(),
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::DuplicateDriver);
        assert_eq!(v[0].subject, "x");
    }

    #[test]
    fn not_ring_is_a_cycle() {
        let v = validate(
            &parse_bench_unchecked("INPUT(a)\nOUTPUT(o)\no = AND(a, r0)\nr0 = NOT(r2)\nr1 = NOT(r0)\nr2 = NOT(r1)\n").unwrap(),
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::CombinationalCycle);
        // `o` is downstream of the ring but not on it.
        assert_eq!(v[0].detail, "r0, r1, r2");
    }

    #[test]
    fn ring_broken_by_dff_is_fine() {
        assert!(rules("INPUT(a)\nOUTPUT(o)\no = AND(a, r0)\nr0 = DFF(r2)\nr1 = NOT(r0)\nr2 = NOT(r1)\n").is_empty());
    }

    #[test]
    fn missing_interface_and_undriven() {
        let mut n = Netlist::new("x");
        n.gates.push(Gate::new("y", GateKind::Not, &["z"]));
        n.outputs.push("w".into());
        let r: Vec<Rule> = validate(&n).into_iter().map(|v| v.rule).collect();
        assert_eq!(r, vec![Rule::NoInterface, Rule::UndrivenNet, Rule::UndrivenOutput]);
    }
}
