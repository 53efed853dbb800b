// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlist model and the ISCAS `.bench` reader/writer.

mod bench;
mod validate;

pub use bench::{parse_bench, parse_bench_unchecked, write_bench, BenchError};
pub use validate::{validate, Rule, Violation};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

/// Primitive cell kinds of the `.bench` format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    And,
    Or,
    Nand,
    Nor,
    Not,
    Xor,
    Xnor,
    Buff,
    Dff,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Not,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Buff,
        GateKind::Dff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Not => "NOT",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Buff => "BUFF",
            GateKind::Dff => "DFF",
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buff | GateKind::Dff)
    }

    /// Whether `n` inputs is a legal arity for this kind.
    pub fn arity_ok(self, n: usize) -> bool {
        if self.is_unary() {
            n == 1
        } else {
            n >= 2
        }
    }

    /// Index of this kind in the node-feature one-hot block.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Combinational evaluation over 64 packed vectors. DFF acts as a buffer
    /// (its frame value is supplied externally by the simulator).
    pub fn eval_words(self, inputs: &[u64]) -> u64 {
        match self {
            GateKind::And => inputs.iter().fold(!0, |a, &b| a & b),
            GateKind::Nand => !inputs.iter().fold(!0, |a, &b| a & b),
            GateKind::Or => inputs.iter().fold(0, |a, &b| a | b),
            GateKind::Nor => !inputs.iter().fold(0, |a, &b| a | b),
            GateKind::Xor => inputs.iter().fold(0, |a, &b| a ^ b),
            GateKind::Xnor => !inputs.iter().fold(0, |a, &b| a ^ b),
            GateKind::Not => !inputs[0],
            GateKind::Buff | GateKind::Dff => inputs[0],
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownGateKind(pub String);

impl FromStr for GateKind {
    type Err = UnknownGateKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "OR" => GateKind::Or,
            "NAND" => GateKind::Nand,
            "NOR" => GateKind::Nor,
            "NOT" | "INV" => GateKind::Not,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "BUFF" | "BUF" => GateKind::Buff,
            "DFF" => GateKind::Dff,
            _ => return Err(UnknownGateKind(s.to_string())),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub output: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
}

impl Gate {
    pub fn new(output: impl Into<String>, kind: GateKind, inputs: &[&str]) -> Self {
        Self {
            output: output.into(),
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// A named gate-level circuit. Gate order is significant (it is the file order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<Gate>,
}

/// Who drives a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Gate(usize),
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Equality of everything except the circuit name.
    pub fn structure_eq(&self, other: &Netlist) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs && self.gates == other.gates
    }

    /// Map net → driver. Later duplicates are ignored; use [`validate`] to detect them.
    pub fn drivers(&self) -> HashMap<&str, Driver> {
        let mut map = HashMap::with_capacity(self.inputs.len() + self.gates.len());
        for (i, n) in self.inputs.iter().enumerate() {
            map.entry(n.as_str()).or_insert(Driver::Input(i));
        }
        for (g, gate) in self.gates.iter().enumerate() {
            map.entry(gate.output.as_str()).or_insert(Driver::Gate(g));
        }
        map
    }

    /// Map net → indices of gates reading it (one entry per pin).
    pub fn consumers(&self) -> HashMap<&str, Vec<usize>> {
        let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
        for (g, gate) in self.gates.iter().enumerate() {
            for i in &gate.inputs {
                map.entry(i.as_str()).or_default().push(g);
            }
        }
        map
    }

    /// Nets read by gates or ports, in first-declaration order: inputs, then gate outputs.
    pub fn nets(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .map(String::as_str)
            .chain(self.gates.iter().map(|g| g.output.as_str()))
            .collect()
    }

    pub fn dff_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::Dff).count()
    }

    pub fn is_sequential(&self) -> bool {
        self.dff_count() > 0
    }

    /// Frame inputs: primary inputs followed by DFF outputs (state nets) in gate order.
    pub fn frame_inputs(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .map(String::as_str)
            .chain(
                self.gates
                    .iter()
                    .filter(|g| g.kind == GateKind::Dff)
                    .map(|g| g.output.as_str()),
            )
            .collect()
    }

    /// Returns a fresh net name not used in this netlist, derived from `base`.
    pub fn fresh_net(&self, base: &str, taken: &std::collections::HashSet<String>) -> String {
        let drivers = self.drivers();
        let mut k = 0usize;
        loop {
            let cand = format!("{base}_{k}");
            if !drivers.contains_key(cand.as_str()) && !taken.contains(&cand) {
                return cand;
            }
            k += 1;
        }
    }
}
