// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use thiserror::Error;

use super::validate::{validate, Rule};
use super::{Gate, GateKind, Netlist};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGate { line: usize, kind: String },
    #[error("line {line}: {kind} requires {expected} inputs, got {got}")]
    Arity {
        line: usize,
        kind: GateKind,
        expected: &'static str,
        got: usize,
    },
    #[error("line {line}: duplicate driver for net `{net}`")]
    DuplicateDriver { line: usize, net: String },
    #[error("line {line}: net `{net}` is never driven")]
    UndrivenNet { line: usize, net: String },
    #[error("line {line}: combinational cycle through {nets:?}")]
    CombinationalCycle { line: usize, nets: Vec<String> },
    #[error("no primary inputs/outputs")]
    NoInterface,
}

impl BenchError {
    pub fn line(&self) -> Option<usize> {
        match self {
            BenchError::Syntax { line, .. }
            | BenchError::UnknownGate { line, .. }
            | BenchError::Arity { line, .. }
            | BenchError::DuplicateDriver { line, .. }
            | BenchError::UndrivenNet { line, .. }
            | BenchError::CombinationalCycle { line, .. } => Some(*line),
            BenchError::NoInterface => None,
        }
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']'))
}

/// Splits `HEAD(args)` into head and argument list; whitespace inside the
/// parentheses is ignored.
fn split_call(s: &str) -> Option<(&str, Vec<String>)> {
    let open = s.find('(')?;
    let rest = s[open + 1..].trim_end();
    let close = rest.strip_suffix(')')?;
    if close.contains('(') || close.contains(')') {
        return None;
    }
    let head = s[..open].trim();
    let args = if close.trim().is_empty() {
        Vec::new()
    } else {
        close
            .split(',')
            .map(|a| a.chars().filter(|c| !c.is_whitespace()).collect())
            .collect()
    };
    Some((head, args))
}

struct Parsed {
    netlist: Netlist,
    input_lines: Vec<usize>,
    output_lines: Vec<usize>,
    gate_lines: Vec<usize>,
}

fn parse_lines(text: &str) -> Result<Parsed, BenchError> {
    let mut p = Parsed {
        netlist: Netlist::new("netlist"),
        input_lines: Vec::new(),
        output_lines: Vec::new(),
        gate_lines: Vec::new(),
    };
    for (idx, raw) in text.split('\n').enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |msg: &str| BenchError::Syntax {
            line,
            msg: msg.to_string(),
        };
        if let Some((lhs, rhs)) = content.split_once('=') {
            let out = lhs.trim();
            if !valid_name(out) {
                return Err(syntax(&format!("invalid net name `{out}`")));
            }
            let (head, args) = split_call(rhs.trim()).ok_or_else(|| syntax("expected KIND(a, b, ...)"))?;
            let kind: GateKind = head.parse().map_err(|_| BenchError::UnknownGate {
                line,
                kind: head.to_string(),
            })?;
            if let Some(bad) = args.iter().find(|a| !valid_name(a)) {
                return Err(syntax(&format!("invalid net name `{bad}`")));
            }
            p.netlist.gates.push(Gate {
                output: out.to_string(),
                kind,
                inputs: args,
            });
            p.gate_lines.push(line);
        } else {
            let (head, args) = split_call(content).ok_or_else(|| syntax("unrecognised statement"))?;
            if args.len() != 1 || !valid_name(&args[0]) {
                return Err(syntax("port declaration takes exactly one net name"));
            }
            match head.to_ascii_uppercase().as_str() {
                "INPUT" => {
                    p.netlist.inputs.push(args[0].clone());
                    p.input_lines.push(line);
                }
                "OUTPUT" => {
                    if p.netlist.outputs.contains(&args[0]) {
                        return Err(syntax(&format!("output `{}` declared twice", args[0])));
                    }
                    p.netlist.outputs.push(args[0].clone());
                    p.output_lines.push(line);
                }
                _ => return Err(syntax(&format!("unknown declaration `{head}`"))),
            }
        }
    }
    Ok(p)
}

/// Parses `.bench` text without checking the structural invariants.
///
/// Only syntax errors and unknown gate kinds are reported; everything else
/// is left for [`validate`].
pub fn parse_bench_unchecked(text: &str) -> Result<Netlist, BenchError> {
    parse_lines(text).map(|p| p.netlist)
}

/// Parses `.bench` text into a validated [`Netlist`].
pub fn parse_bench(text: &str) -> Result<Netlist, BenchError> {
    let p = parse_lines(text)?;
    let report = validate(&p.netlist);
    let Some(first) = report.into_iter().next() else {
        return Ok(p.netlist);
    };

    // Locate the line responsible for the first violation.
    let mut def_line: HashMap<&str, usize> = HashMap::new();
    let mut dup_line: HashMap<&str, usize> = HashMap::new();
    for (n, &l) in p.netlist.inputs.iter().zip(&p.input_lines) {
        if def_line.insert(n.as_str(), l).is_some() {
            dup_line.entry(n.as_str()).or_insert(l);
        }
    }
    for (g, &l) in p.netlist.gates.iter().zip(&p.gate_lines) {
        if def_line.contains_key(g.output.as_str()) {
            dup_line.entry(g.output.as_str()).or_insert(l);
        } else {
            def_line.insert(g.output.as_str(), l);
        }
    }
    let use_line = |net: &str| -> usize {
        for (g, &l) in p.netlist.gates.iter().zip(&p.gate_lines) {
            if g.inputs.iter().any(|i| i == net) {
                return l;
            }
        }
        for (o, &l) in p.netlist.outputs.iter().zip(&p.output_lines) {
            if o == net {
                return l;
            }
        }
        0
    };
    let err = match first.rule {
        Rule::NoInterface => BenchError::NoInterface,
        Rule::Arity => {
            let gi = first.gate.expect("arity violation names a gate");
            let gate = &p.netlist.gates[gi];
            BenchError::Arity {
                line: p.gate_lines[gi],
                kind: gate.kind,
                expected: if gate.kind.is_unary() { "exactly 1" } else { "at least 2" },
                got: gate.inputs.len(),
            }
        }
        Rule::DuplicateDriver => BenchError::DuplicateDriver {
            line: dup_line.get(first.subject.as_str()).copied().unwrap_or(0),
            net: first.subject,
        },
        Rule::UndrivenNet | Rule::UndrivenOutput => BenchError::UndrivenNet {
            line: use_line(&first.subject),
            net: first.subject,
        },
        Rule::CombinationalCycle => {
            let nets: Vec<String> = first.detail.split(", ").map(str::to_string).collect();
            BenchError::CombinationalCycle {
                line: def_line.get(nets[0].as_str()).copied().unwrap_or(0),
                nets,
            }
        }
    };
    Err(err)
}

/// Emits canonical `.bench`: inputs, outputs, then gates in order; `\n` line endings.
pub fn write_bench(netlist: &Netlist) -> String {
    let mut s = String::new();
    for i in &netlist.inputs {
        s.push_str(&format!("INPUT({i})\n"));
    }
    for o in &netlist.outputs {
        s.push_str(&format!("OUTPUT({o})\n"));
    }
    for g in &netlist.gates {
        s.push_str(&format!("{} = {}({})\n", g.output, g.kind, g.inputs.join(", ")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const C17: &str = "# c17\nINPUT(1)\nINPUT(2)\nINPUT(3)\nINPUT(6)\nINPUT(7)\nOUTPUT(22)\nOUTPUT(23)\n\
        10 = NAND(1, 3)\n11 = NAND(3, 6)\n16 = NAND(2, 11)\n19 = NAND(11, 7)\n22 = NAND(10, 16)\n23 = NAND(16, 19)\n";

    #[test]
    fn parses_single_nand() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)").unwrap();
        assert_eq!(n.inputs, vec!["a", "b"]);
        assert_eq!(n.outputs, vec!["y"]);
        assert_eq!(n.gates, vec![Gate::new("y", GateKind::Nand, &["a", "b"])]);
    }

    #[test]
    fn empty_text_has_no_interface() {
        assert_eq!(parse_bench(""), Err(BenchError::NoInterface));
        assert_eq!(parse_bench("# only a comment\n\n"), Err(BenchError::NoInterface));
    }

    #[test]
    fn and_with_one_input_is_rejected() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a)\n").unwrap_err();
        assert!(matches!(err, BenchError::Arity { line: 3, kind: GateKind::And, got: 1, .. }), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = FOO(a, a)\n").unwrap_err();
        assert_eq!(err, BenchError::UnknownGate { line: 3, kind: "FOO".into() });

        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUFF(a)\n").unwrap_err();
        assert_eq!(err, BenchError::DuplicateDriver { line: 4, net: "y".into() });

        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, q)\n").unwrap_err();
        assert_eq!(err, BenchError::UndrivenNet { line: 3, net: "q".into() });

        let err = parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, y\n").unwrap_err();
        assert!(matches!(err, BenchError::Syntax { line: 3, .. }));

        let err = parse_bench("INPUT(a)\nOUTPUT(y)\nx = NOT(y)\ny = NOT(x)\n").unwrap_err();
        assert!(matches!(err, BenchError::CombinationalCycle { line: 3, .. }), "{err}");
    }

    #[test]
    fn dff_loop_is_not_a_cycle() {
        let n = parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(d)\nd = XOR(a, q)\n").unwrap();
        assert_eq!(n.dff_count(), 1);
    }

    #[test]
    fn crlf_and_whitespace_in_parens() {
        let n = parse_bench("INPUT( a )\r\nINPUT(b)\r\nOUTPUT(y)\r\ny = and( a ,  b )  # trailing\r\n").unwrap();
        assert_eq!(n.gates[0].inputs, vec!["a", "b"]);
        assert_eq!(n.gates[0].kind, GateKind::And);
    }

    #[test]
    fn names_allow_brackets_and_dots() {
        let n = parse_bench("INPUT(bus[0])\nINPUT(u.x_1)\nOUTPUT(o)\no = OR(bus[0], u.x_1)\n").unwrap();
        assert_eq!(n.inputs, vec!["bus[0]", "u.x_1"]);
        assert!(parse_bench("INPUT(a-b)\nOUTPUT(a-b)\n").is_err());
    }

    #[test]
    fn writes_four_lines_for_one_gate() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)").unwrap();
        let text = write_bench(&n);
        assert_eq!(text, "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn dff_written_with_single_argument() {
        let n = parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(d)\nd = NOT(a)\n").unwrap();
        assert!(write_bench(&n).contains("q = DFF(d)\n"));
    }

    #[test]
    fn c17_round_trip() {
        let n = parse_bench(C17).unwrap();
        assert_eq!(n.gates.len(), 6);
        let again = parse_bench(&write_bench(&n)).unwrap();
        assert!(again.structure_eq(&n));
    }

    fn arb_netlist() -> impl Strategy<Value = Netlist> {
        // Random DAG over a growing pool of nets, some DFFs feeding back.
        (1usize..6, 1usize..25, any::<u64>()).prop_map(|(ni, ng, seed)| {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let mut n = Netlist::new("rand");
            let mut pool: Vec<String> = (0..ni).map(|i| format!("i{i}")).collect();
            n.inputs = pool.clone();
            for g in 0..ng {
                let kind = GateKind::ALL[rng.below(8)];
                let k = if kind.is_unary() { 1 } else { 2 + rng.below(3) };
                let ins: Vec<String> = (0..k).map(|_| pool[rng.below(pool.len())].clone()).collect();
                let out = format!("n{g}");
                n.gates.push(Gate { output: out.clone(), kind, inputs: ins });
                pool.push(out);
            }
            if rng.below(2) == 0 {
                let src = pool[rng.below(pool.len())].clone();
                n.gates.push(Gate { output: "q".into(), kind: GateKind::Dff, inputs: vec![src] });
            }
            n.outputs.push(pool.last().unwrap().clone());
            n
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(n in arb_netlist()) {
            let text = write_bench(&n);
            let back = parse_bench(&text).unwrap();
            prop_assert!(back.structure_eq(&n));
            prop_assert!(validate(&back).is_empty());
        }

        #[test]
        fn parser_is_total(s in "[A-Za-z0-9()=,# \n]{0,200}") {
            match parse_bench(&s) {
                Ok(n) => prop_assert!(validate(&n).is_empty()),
                Err(e) => prop_assert!(e.line().is_some() || e == BenchError::NoInterface),
            }
        }
    }
}
