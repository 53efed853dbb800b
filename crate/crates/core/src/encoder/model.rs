// SPDX-License-Identifier: Apache-2.0

use super::EncoderError;
use crate::graph::{CircuitGraph, Propagation, FEATURE_DIM};
use crate::rng::SplitMix64;
use crate::tensor::{ops, Matrix, Param};

/// Parameter order inside [`EncoderModel::params`].
pub const PARAM_NAMES: [&str; 5] = ["W1", "W2", "W3", "Wp", "bp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub f0: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    pub dz: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        Self {
            f0: FEATURE_DIM,
            d1: 64,
            d2: 64,
            d3: 64,
            dz: 32,
        }
    }
}

impl EncoderDims {
    pub fn shapes(&self) -> [(usize, usize); 5] {
        [
            (self.f0, self.d1),
            (self.d1, self.d2),
            (self.d2, self.d3),
            (self.d3, self.dz),
            (1, self.dz),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub dims: EncoderDims,
    /// `[W1, W2, W3, Wp, bp]`, see [`PARAM_NAMES`].
    pub params: Vec<Param>,
}

/// A graph prepared for the encoder: the propagation operator and the
/// first-layer input `S·X`, which does not depend on the weights.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub nodes: usize,
    pub features: usize,
    pub s: Propagation,
    pub sx: Matrix,
}

impl GraphInput {
    pub fn new(graph: &CircuitGraph) -> Self {
        let s = graph.propagation();
        let sx = s.apply(&graph.features);
        Self {
            nodes: graph.node_count,
            features: graph.features.cols(),
            s,
            sx,
        }
    }
}

/// Forward values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Left operand of each layer's weight product: `S·H⁽ˡ⁾`.
    pub p: [Matrix; 3],
    /// Pre-activations `S·H⁽ˡ⁾·W⁽ˡ⁾`.
    pub a: [Matrix; 3],
    pub pooled: Matrix,
    pub z: Matrix,
}

impl EncoderModel {
    /// Glorot-uniform weights; the projection is additionally scaled by
    /// `proj_scale` because sum pooling grows with graph size.
    pub fn new(dims: EncoderDims, seed: u64, proj_scale: f64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let shapes = dims.shapes();
        let params = shapes
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| {
                if i == 4 {
                    return Param::new(Matrix::zeros(r, c));
                }
                let limit = (6.0 / (r + c) as f64).sqrt() * if i == 3 { proj_scale } else { 1.0 };
                let data = (0..r * c).map(|_| rng.uniform(-limit, limit)).collect();
                Param::new(Matrix::from_vec(r, c, data).expect("shape"))
            })
            .collect();
        Self { dims, params }
    }

    pub fn zeros(dims: EncoderDims) -> Self {
        let params = dims.shapes().iter().map(|&(r, c)| Param::new(Matrix::zeros(r, c))).collect();
        Self { dims, params }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    pub fn forward(&self, g: &GraphInput) -> Result<Trace, EncoderError> {
        if g.features != self.dims.f0 {
            return Err(EncoderError::FeatureWidth {
                expected: self.dims.f0,
                got: g.features,
            });
        }
        let w = |i: usize| &self.params[i].value;
        let p0 = g.sx.clone();
        let a0 = p0.matmul(w(0))?;
        let p1 = g.s.apply(&ops::relu(&a0));
        let a1 = p1.matmul(w(1))?;
        let p2 = g.s.apply(&ops::relu(&a1));
        let a2 = p2.matmul(w(2))?;
        let pooled = ops::row_sum(&ops::relu(&a2));
        let u = ops::add_bias(&pooled.matmul(w(3))?, w(4))?;
        let z = ops::tanh(&u);
        Ok(Trace {
            p: [p0, p1, p2],
            a: [a0, a1, a2],
            pooled,
            z,
        })
    }

    pub fn embed(&self, g: &GraphInput) -> Result<Vec<f64>, EncoderError> {
        Ok(self.forward(g)?.z.into_vec())
    }

    /// Adds `∂(dz·z)/∂θ` to `grads` (one matrix per parameter).
    pub fn backward(&self, g: &GraphInput, t: &Trace, dz: &[f64], grads: &mut [Matrix]) -> Result<(), EncoderError> {
        let w = |i: usize| &self.params[i].value;
        let du = ops::tanh_backward(&t.z, &Matrix::row_vector(dz))?;
        grads[3].add_assign(&t.pooled.matmul_tn(&du)?)?;
        grads[4].add_assign(&du)?;
        let dpooled = du.matmul_nt(w(3))?;
        let mut dh = ops::row_sum_backward(&dpooled, g.nodes);
        for l in (0..3).rev() {
            let da = ops::relu_backward(&t.a[l], &dh)?;
            grads[l].add_assign(&t.p[l].matmul_tn(&da)?)?;
            if l > 0 {
                dh = g.s.apply(&da.matmul_nt(w(l))?);
            }
        }
        Ok(())
    }

    pub fn grad_buffers(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect()
    }
}

/// Embedding of one circuit graph.
pub fn embed(graph: &CircuitGraph, model: &EncoderModel) -> Result<Vec<f64>, EncoderError> {
    model.embed(&GraphInput::new(graph))
}
