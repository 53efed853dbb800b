// SPDX-License-Identifier: Apache-2.0

//! Netlist → directed graph with node features and the symmetric
//! degree-normalized adjacency used for graph convolution.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::netlist::{Driver, GateKind, Netlist};
use crate::tensor::Matrix;

/// Width of the cell-kind one-hot block: nine gate kinds plus INPUT and OUTPUT.
pub const KIND_SLOTS: usize = 11;
pub const INPUT_SLOT: usize = 9;
pub const OUTPUT_SLOT: usize = 10;
/// Node feature width: one-hot kind, capped fan-in, capped fan-out.
pub const FEATURE_DIM: usize = KIND_SLOTS + 2;
/// Fan counts saturate here before scaling to `[0, 1]`.
pub const FAN_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeOrigin {
    Input(String),
    Gate { index: usize, net: String },
    Output(String),
}

#[derive(Debug, Clone)]
pub struct CircuitGraph {
    pub node_count: usize,
    pub features: Matrix,
    /// Directed (signal-flow) edges; duplicates kept when a gate reads a net twice.
    pub edges: Vec<(usize, usize)>,
    pub origin: Vec<NodeOrigin>,
}

fn fan_feature(n: usize) -> f64 {
    n.min(FAN_CAP) as f64 / FAN_CAP as f64
}

/// Node order: primary inputs, gates (file order), primary outputs.
pub fn build_graph(netlist: &Netlist) -> CircuitGraph {
    let n_in = netlist.inputs.len();
    let n_gate = netlist.gates.len();
    let n = n_in + n_gate + netlist.outputs.len();
    let drivers = netlist.drivers();
    let node_of = |net: &str| -> Option<usize> {
        drivers.get(net).map(|d| match *d {
            Driver::Input(i) => i,
            Driver::Gate(g) => n_in + g,
        })
    };

    let mut edges = Vec::new();
    for (gi, g) in netlist.gates.iter().enumerate() {
        for i in &g.inputs {
            if let Some(src) = node_of(i) {
                edges.push((src, n_in + gi));
            }
        }
    }
    for (oi, o) in netlist.outputs.iter().enumerate() {
        if let Some(src) = node_of(o) {
            edges.push((src, n_in + n_gate + oi));
        }
    }

    let mut fan_in = vec![0usize; n];
    let mut fan_out = vec![0usize; n];
    for &(u, v) in &edges {
        fan_out[u] += 1;
        fan_in[v] += 1;
    }

    let mut features = Matrix::zeros(n, FEATURE_DIM);
    let mut origin = Vec::with_capacity(n);
    for (i, name) in netlist.inputs.iter().enumerate() {
        features.set(i, INPUT_SLOT, 1.0);
        origin.push(NodeOrigin::Input(name.clone()));
    }
    for (gi, g) in netlist.gates.iter().enumerate() {
        features.set(n_in + gi, g.kind.index(), 1.0);
        origin.push(NodeOrigin::Gate {
            index: gi,
            net: g.output.clone(),
        });
    }
    for (oi, o) in netlist.outputs.iter().enumerate() {
        features.set(n_in + n_gate + oi, OUTPUT_SLOT, 1.0);
        origin.push(NodeOrigin::Output(o.clone()));
    }
    for v in 0..n {
        features.set(v, KIND_SLOTS, fan_feature(fan_in[v]));
        features.set(v, KIND_SLOTS + 1, fan_feature(fan_out[v]));
    }

    CircuitGraph {
        node_count: n,
        features,
        edges,
        origin,
    }
}

impl CircuitGraph {
    pub fn kind_of(&self, node: usize) -> usize {
        (0..KIND_SLOTS)
            .find(|&k| self.features.get(node, k) == 1.0)
            .expect("one-hot kind")
    }

    /// Undirected neighbour sets without self-loops.
    fn neighbours(&self) -> Vec<BTreeSet<usize>> {
        let mut nb = vec![BTreeSet::new(); self.node_count];
        for &(u, v) in &self.edges {
            if u != v {
                nb[u].insert(v);
                nb[v].insert(u);
            }
        }
        nb
    }

    /// Sparse form of the normalized adjacency, used on the training path.
    pub fn propagation(&self) -> Propagation {
        let nb = self.neighbours();
        let deg: Vec<f64> = nb.iter().map(|s| (s.len() + 1) as f64).collect();
        let mut row_ptr = Vec::with_capacity(self.node_count + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (u, set) in nb.iter().enumerate() {
            // Merge the self-loop into the sorted neighbour list.
            let mut inserted = false;
            for &v in set {
                if !inserted && u < v {
                    cols.push(u);
                    vals.push(1.0 / deg[u]);
                    inserted = true;
                }
                cols.push(v);
                vals.push(1.0 / (deg[u] * deg[v]).sqrt());
            }
            if !inserted {
                cols.push(u);
                vals.push(1.0 / deg[u]);
            }
            row_ptr.push(cols.len());
        }
        Propagation {
            n: self.node_count,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> CircuitGraph {
        let n = self.node_count;
        assert_eq!(perm.len(), n);
        let mut features = Matrix::zeros(n, self.features.cols());
        let mut origin = vec![NodeOrigin::Input(String::new()); n];
        for v in 0..n {
            features.row_mut(perm[v]).copy_from_slice(self.features.row(v));
            origin[perm[v]] = self.origin[v].clone();
        }
        CircuitGraph {
            node_count: n,
            features,
            edges: self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect(),
            origin,
        }
    }

    /// Edge list `u v` per line.
    pub fn edge_list_text(&self) -> String {
        let mut s = String::new();
        for &(u, v) in &self.edges {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    /// Feature CSV with a header row; one row per node.
    pub fn features_csv(&self) -> String {
        let mut s = String::from("node,kind");
        for k in 0..KIND_SLOTS {
            let _ = write!(s, ",k{k}");
        }
        s.push_str(",fan_in,fan_out\n");
        for v in 0..self.node_count {
            let label = match &self.origin[v] {
                NodeOrigin::Input(_) => "INPUT".to_string(),
                NodeOrigin::Output(_) => "OUTPUT".to_string(),
                NodeOrigin::Gate { .. } => GateKind::ALL[self.kind_of(v)].name().to_string(),
            };
            let _ = write!(s, "{v},{label}");
            for x in self.features.row(v) {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }
}

/// Dense `S = D̃^{-1/2} (A_sym + I) D̃^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(pub Matrix);

pub fn normalized_adjacency(graph: &CircuitGraph) -> NormalizedAdjacency {
    let n = graph.node_count;
    let mut a = Matrix::identity(n);
    for &(u, v) in &graph.edges {
        if u != v {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
    }
    let deg: Vec<f64> = (0..n).map(|u| a.row(u).iter().sum()).collect();
    for u in 0..n {
        for v in 0..n {
            if a.get(u, v) != 0.0 {
                a.set(u, v, 1.0 / (deg[u] * deg[v]).sqrt());
            }
        }
    }
    NormalizedAdjacency(a)
}

/// Sparse symmetric propagation operator in CSR form.
#[derive(Debug, Clone)]
pub struct Propagation {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Propagation {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `S · x`. Since `S` is symmetric this is also the backward map.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.n, "propagation shape");
        let c = x.cols();
        let mut out = Matrix::zeros(self.n, c);
        for u in 0..self.n {
            let dst = u * c;
            for k in self.row_ptr[u]..self.row_ptr[u + 1] {
                let w = self.vals[k];
                let src = x.row(self.cols[k]);
                let row = &mut out.data_mut()[dst..dst + c];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for u in 0..self.n {
            for k in self.row_ptr[u]..self.row_ptr[u + 1] {
                m.set(u, self.cols[k], self.vals[k]);
            }
        }
        m
    }
}

/// Maps each netlist net to its graph node, for callers that need to locate gates.
pub fn net_nodes(netlist: &Netlist) -> HashMap<String, usize> {
    let n_in = netlist.inputs.len();
    let mut m = HashMap::new();
    for (i, name) in netlist.inputs.iter().enumerate() {
        m.insert(name.clone(), i);
    }
    for (gi, g) in netlist.gates.iter().enumerate() {
        m.insert(g.output.clone(), n_in + gi);
    }
    m
}
