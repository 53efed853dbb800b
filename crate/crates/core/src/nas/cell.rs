// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use crate::rng::SplitMix64;
use crate::tensor::{Matrix, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    /// Fully connected, no activation.
    Dense,
    /// Single-channel kernel-3 convolution, zero padded.
    Conv1d,
    /// Window-2 max pool.
    MaxPool,
    /// Window-2 average pool.
    AvgPool,
    /// Copies (or, when striding, subsamples) the input.
    Identity,
    /// Per-position `relu(a·x + c)`.
    ReluGate,
}

impl CellKind {
    pub const ALL: [CellKind; 6] = [
        CellKind::Dense,
        CellKind::Conv1d,
        CellKind::MaxPool,
        CellKind::AvgPool,
        CellKind::Identity,
        CellKind::ReluGate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Dense => "dense",
            CellKind::Conv1d => "conv1d",
            CellKind::MaxPool => "maxpool",
            CellKind::AvgPool => "avgpool",
            CellKind::Identity => "identity",
            CellKind::ReluGate => "relu_gate",
        }
    }

    /// Output length for a given input length; stride 2 halves (floor).
    pub fn output_len(self, in_len: usize, stride: usize) -> usize {
        if stride == 2 {
            in_len / 2
        } else {
            in_len
        }
    }

    /// Shapes of the trainable tensors.
    pub fn param_shapes(self, in_len: usize, out_len: usize) -> Vec<(usize, usize)> {
        match self {
            CellKind::Dense => vec![(in_len, out_len), (1, out_len)],
            CellKind::Conv1d => vec![(1, 3), (1, 1)],
            CellKind::ReluGate => vec![(1, out_len), (1, out_len)],
            CellKind::MaxPool | CellKind::AvgPool | CellKind::Identity => vec![],
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CellKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown cell kind `{s}`"))
    }
}

/// Uniform on `±sqrt(3 / fan_in)`, i.e. variance `1 / fan_in`.
pub(crate) fn fan_in_uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut SplitMix64) -> Matrix {
    let a = (3.0 / fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform(-a, a)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    pub in_len: usize,
    pub out_len: usize,
    pub stride: usize,
    pub params: Vec<Param>,
}

impl Cell {
    pub fn new(kind: CellKind, in_len: usize, stride: usize, rng: &mut SplitMix64) -> Self {
        let out_len = kind.output_len(in_len, stride);
        let params = match kind {
            CellKind::Dense => vec![
                Param::new(fan_in_uniform(in_len, out_len, in_len, rng)),
                Param::new(Matrix::zeros(1, out_len)),
            ],
            CellKind::Conv1d => vec![
                Param::new(fan_in_uniform(1, 3, 3, rng)),
                Param::new(Matrix::zeros(1, 1)),
            ],
            // Starts as a plain ReLU.
            CellKind::ReluGate => vec![
                Param::new(Matrix::filled(1, out_len, 1.0)),
                Param::new(Matrix::zeros(1, out_len)),
            ],
            _ => vec![],
        };
        Self {
            kind,
            in_len,
            out_len,
            stride,
            params,
        }
    }

    /// Input positions read by output `i` of a window-2 pool.
    fn window(&self, i: usize) -> std::ops::Range<usize> {
        let lo = self.stride * i;
        lo..(lo + 2).min(self.in_len)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_len);
        let s = self.stride;
        match self.kind {
            CellKind::Dense => {
                let w = &self.params[0].value;
                let mut y = self.params[1].value.data().to_vec();
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        for (yj, wij) in y.iter_mut().zip(w.row(i)) {
                            *yj += xi * wij;
                        }
                    }
                }
                y
            }
            CellKind::Conv1d => {
                let w = self.params[0].value.data();
                let b = self.params[1].value.data()[0];
                (0..self.out_len)
                    .map(|i| {
                        let mut acc = b;
                        for (k, wk) in w.iter().enumerate() {
                            if let Some(&v) = (s * i + k).checked_sub(1).and_then(|j| x.get(j)) {
                                acc += wk * v;
                            }
                        }
                        acc
                    })
                    .collect()
            }
            CellKind::MaxPool => (0..self.out_len)
                .map(|i| x[self.window(i)].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
            CellKind::AvgPool => (0..self.out_len)
                .map(|i| {
                    let w = &x[self.window(i)];
                    w.iter().sum::<f64>() / w.len() as f64
                })
                .collect(),
            CellKind::Identity => (0..self.out_len).map(|i| x[s * i]).collect(),
            CellKind::ReluGate => {
                let a = self.params[0].value.data();
                let c = self.params[1].value.data();
                (0..self.out_len).map(|i| (a[i] * x[s * i] + c[i]).max(0.0)).collect()
            }
        }
    }

    /// Accumulates parameter gradients into `grads` (one per param) and
    /// returns the gradient w.r.t. `x`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut [Matrix]) -> Vec<f64> {
        let s = self.stride;
        let mut dx = vec![0.0; self.in_len];
        match self.kind {
            CellKind::Dense => {
                let w = &self.params[0].value;
                let (gw, gb) = grads.split_at_mut(1);
                for (i, &xi) in x.iter().enumerate() {
                    let wr = w.row(i);
                    let gr = gw[0].row_mut(i);
                    let mut acc = 0.0;
                    for j in 0..self.out_len {
                        gr[j] += xi * dy[j];
                        acc += wr[j] * dy[j];
                    }
                    dx[i] = acc;
                }
                for (g, d) in gb[0].data_mut().iter_mut().zip(dy) {
                    *g += d;
                }
            }
            CellKind::Conv1d => {
                let w = self.params[0].value.data();
                for (i, &d) in dy.iter().enumerate() {
                    for (k, wk) in w.iter().enumerate() {
                        if let Some(j) = (s * i + k).checked_sub(1).filter(|&j| j < self.in_len) {
                            grads[0].data_mut()[k] += d * x[j];
                            dx[j] += wk * d;
                        }
                    }
                    grads[1].data_mut()[0] += d;
                }
            }
            CellKind::MaxPool => {
                for (i, &d) in dy.iter().enumerate() {
                    let win = self.window(i);
                    let mut arg = win.start;
                    for j in win {
                        if x[j] > x[arg] {
                            arg = j;
                        }
                    }
                    dx[arg] += d;
                }
            }
            CellKind::AvgPool => {
                for (i, &d) in dy.iter().enumerate() {
                    let win = self.window(i);
                    let n = win.len() as f64;
                    for j in win {
                        dx[j] += d / n;
                    }
                }
            }
            CellKind::Identity => {
                for (i, &d) in dy.iter().enumerate() {
                    dx[s * i] += d;
                }
            }
            CellKind::ReluGate => {
                let a = self.params[0].value.data();
                let c = self.params[1].value.data();
                for (i, &d) in dy.iter().enumerate() {
                    let xi = x[s * i];
                    if a[i] * xi + c[i] > 0.0 {
                        grads[0].data_mut()[i] += d * xi;
                        grads[1].data_mut()[i] += d;
                        dx[s * i] += a[i] * d;
                    }
                }
            }
        }
        dx
    }
}
