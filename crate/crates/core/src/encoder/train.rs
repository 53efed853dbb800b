// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{EncoderDims, EncoderError, EncoderModel, GraphInput};
use crate::augment::{Role, Sample};
use crate::graph::build_graph;
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::{Adam, AdamConfig, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SslHyper {
    pub margin: f64,
    /// Weights of the positive, negative and global terms.
    pub lambda: [f64; 3],
    pub epochs: usize,
    /// Anchor groups per mini-batch.
    pub batch_groups: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Initial scale of the projection weights relative to Glorot.
    pub proj_scale: f64,
    pub dims: EncoderDims,
}

impl Default for SslHyper {
    fn default() -> Self {
        Self {
            margin: 1.0,
            lambda: [1.0, 1.0, 0.5],
            epochs: 150,
            batch_groups: 2,
            adam: AdamConfig::default(),
            seed: 0,
            proj_scale: 0.05,
            dims: EncoderDims::default(),
        }
    }
}

/// Indices into [`TrainSet::graphs`] for one anchor and its variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub anchor: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl Group {
    fn members(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.anchor)
            .chain(self.positives.iter().copied())
            .chain(self.negatives.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct TrainSet {
    pub graphs: Vec<GraphInput>,
    pub labels: Vec<usize>,
    pub groups: Vec<Group>,
}

impl TrainSet {
    /// Groups samples by origin anchor. Every group needs its anchor sample.
    pub fn from_samples(samples: &[&Sample]) -> Result<Self, EncoderError> {
        let mut by_origin: BTreeMap<usize, (Option<usize>, Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            let e = by_origin.entry(s.origin).or_default();
            match s.role {
                Role::Anchor => e.0 = Some(i),
                Role::Positive => e.1.push(i),
                Role::Negative => e.2.push(i),
            }
        }
        let mut groups = Vec::new();
        for (origin, (anchor, positives, negatives)) in by_origin {
            let anchor = anchor.ok_or_else(|| EncoderError::Degenerate(format!("origin {origin} has no anchor sample")))?;
            groups.push(Group {
                anchor,
                positives,
                negatives,
            });
        }
        let graphs = samples
            .par_iter()
            .map(|s| GraphInput::new(&build_graph(&s.netlist)))
            .collect();
        Ok(Self {
            graphs,
            labels: samples.iter().map(|s| s.label).collect(),
            groups,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub lp: f64,
    pub ln: f64,
    pub lg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub parts: LossParts,
}

impl EpochLoss {
    pub const CSV_HEADER: &'static str = "epoch,L_P,L_N,L_G,L";

    pub fn csv_row(&self) -> String {
        let p = self.parts;
        format!("{},{},{},{},{}", self.epoch, p.lp, p.ln, p.lg, p.total)
    }
}

/// Hybrid loss of the given anchor groups and its gradient for every
/// encoder parameter. Centroids are taken from the batch and held constant.
pub fn batch_objective(
    model: &EncoderModel,
    set: &TrainSet,
    groups: &[usize],
    hyper: &SslHyper,
) -> Result<(LossParts, Vec<Matrix>), EncoderError> {
    let members: Vec<usize> = groups.iter().flat_map(|&g| set.groups[g].members()).collect();
    let pos: BTreeMap<usize, usize> = members.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let traces = members
        .par_iter()
        .map(|&g| model.forward(&set.graphs[g]))
        .collect::<Result<Vec<_>, _>>()?;
    let z: Vec<&[f64]> = traces.iter().map(|t| t.z.data()).collect();
    let dzn = model.dims.dz;
    let mut dz = vec![vec![0.0; dzn]; members.len()];
    let [l1, l2, l3] = hyper.lambda;
    let m = hyper.margin;
    let mut parts = LossParts::default();

    for &gi in groups {
        let g = &set.groups[gi];
        let a = pos[&g.anchor];
        for &p in &g.positives {
            let p = pos[&p];
            for k in 0..dzn {
                let d = z[a][k] - z[p][k];
                parts.lp += d * d;
                dz[a][k] += 2.0 * l1 * d;
                dz[p][k] -= 2.0 * l1 * d;
            }
        }
        for &n in &g.negatives {
            let n = pos[&n];
            let s: f64 = (0..dzn).map(|k| (z[a][k] - z[n][k]).powi(2)).sum();
            if s < m {
                parts.ln += m - s;
                for k in 0..dzn {
                    let d = z[a][k] - z[n][k];
                    dz[a][k] -= 2.0 * l2 * d;
                    dz[n][k] += 2.0 * l2 * d;
                }
            }
        }
    }

    // Batch-local centroids for the classes present.
    let mut mu = [vec![0.0; dzn], vec![0.0; dzn]];
    let mut count = [0usize; 2];
    for (i, &g) in members.iter().enumerate() {
        let k = set.labels[g];
        count[k] += 1;
        for d in 0..dzn {
            mu[k][d] += z[i][d];
        }
    }
    for k in 0..2 {
        if count[k] > 0 {
            mu[k].iter_mut().for_each(|x| *x /= count[k] as f64);
        }
    }
    for (i, &g) in members.iter().enumerate() {
        let k = set.labels[g];
        for d in 0..dzn {
            let e = z[i][d] - mu[k][d];
            parts.lg += e * e;
            dz[i][d] += 2.0 * l3 * e;
        }
    }
    parts.total = l1 * parts.lp + l2 * parts.ln + l3 * parts.lg;

    let per_graph = members
        .par_iter()
        .zip(traces.par_iter())
        .zip(dz.par_iter())
        .map(|((&g, t), d)| {
            let mut buf = model.grad_buffers();
            if d.iter().any(|&x| x != 0.0) {
                model.backward(&set.graphs[g], t, d, &mut buf)?;
            }
            Ok(buf)
        })
        .collect::<Result<Vec<_>, EncoderError>>()?;
    let mut grads = model.grad_buffers();
    for buf in &per_graph {
        for (acc, b) in grads.iter_mut().zip(buf) {
            acc.add_assign(b)?;
        }
    }
    Ok((parts, grads))
}

/// Mini-batch Adam over whole anchor groups. `observer` sees the model at
/// epoch 0 (initial weights) and after every epoch.
pub fn train_encoder(
    set: &TrainSet,
    hyper: &SslHyper,
    mut observer: impl FnMut(usize, &EncoderModel),
) -> Result<(EncoderModel, Vec<EpochLoss>), EncoderError> {
    if !set.groups.iter().any(|g| !g.positives.is_empty() && !g.negatives.is_empty()) {
        return Err(EncoderError::Degenerate(
            "no anchor has both a positive and a negative".into(),
        ));
    }
    let mut model = EncoderModel::new(hyper.dims, derive_seed(hyper.seed, 1), hyper.proj_scale);
    let mut adam = Adam::new(hyper.adam);
    let mut history = Vec::with_capacity(hyper.epochs);
    observer(0, &model);
    let bs = hyper.batch_groups.max(1);
    for epoch in 1..=hyper.epochs {
        let mut rng = SplitMix64::new(derive_seed(hyper.seed, 1000 + epoch as u64));
        let order = rng.permutation(set.groups.len());
        let mut sum = LossParts::default();
        let mut batches = 0usize;
        for batch in order.chunks(bs) {
            let (parts, grads) = batch_objective(&model, set, batch, hyper)?;
            for (p, g) in model.params.iter_mut().zip(grads) {
                p.grad = g;
            }
            let mut refs: Vec<&mut _> = model.params.iter_mut().collect();
            adam.step(&mut refs);
            sum.lp += parts.lp;
            sum.ln += parts.ln;
            sum.lg += parts.lg;
            sum.total += parts.total;
            batches += 1;
        }
        let b = batches.max(1) as f64;
        history.push(EpochLoss {
            epoch,
            parts: LossParts {
                lp: sum.lp / b,
                ln: sum.ln / b,
                lg: sum.lg / b,
                total: sum.total / b,
            },
        });
        observer(epoch, &model);
    }
    model.zero_grad();
    Ok((model, history))
}
