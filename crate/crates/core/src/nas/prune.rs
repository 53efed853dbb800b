// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use super::shapley::ShapleyReport;
use super::supernet::{train_supernet, Labeled, NasEpoch, NasHyper, SuperNet};
use super::NasError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrunePolicy {
    /// Keep cells with `φ ≥ τ`.
    Threshold(f64),
    /// Keep the `k` highest-φ cells of every layer.
    TopK(usize),
}

impl fmt::Display for PrunePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrunePolicy::Threshold(t) => write!(f, "tau={t}"),
            PrunePolicy::TopK(k) => write!(f, "top{k}"),
        }
    }
}

/// A SuperNet whose mask is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SubNet {
    net: SuperNet,
    pub policy: PrunePolicy,
    /// Seed and permutation count of the report the mask came from.
    pub report_seed: u64,
    pub report_permutations: usize,
}

impl SubNet {
    pub fn net(&self) -> &SuperNet {
        &self.net
    }

    /// Rebuilds a SubNet from a stored net whose mask is already set.
    pub fn from_parts(net: SuperNet, policy: PrunePolicy, report_seed: u64, report_permutations: usize) -> Self {
        Self {
            net,
            policy,
            report_seed,
            report_permutations,
        }
    }

    pub fn classify(&self, z: &[f64]) -> Result<(usize, f64), NasError> {
        self.net.classify(z)
    }

    pub fn accuracy(&self, data: &[Labeled]) -> Result<f64, NasError> {
        self.net.accuracy(data)
    }

    pub fn pruned_fraction(&self) -> f64 {
        1.0 - self.net.active_count() as f64 / self.net.n_cells() as f64
    }
}

/// Index of the first maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Masks cells by φ. The highest-φ cell of each layer is always kept.
pub fn prune(net: &SuperNet, report: &ShapleyReport, policy: PrunePolicy) -> Result<SubNet, NasError> {
    let per = net.cells_per_layer();
    if report.phi.len() != net.n_cells() || report.cells_per_layer != per {
        return Err(NasError::Degenerate(format!(
            "report covers {} cells, net has {}",
            report.phi.len(),
            net.n_cells()
        )));
    }
    let mask: Vec<Vec<bool>> = report
        .phi
        .chunks(per)
        .map(|row| {
            let best = argmax(row);
            let keep: Vec<bool> = match policy {
                PrunePolicy::Threshold(t) => row.iter().map(|&p| p >= t).collect(),
                PrunePolicy::TopK(k) => {
                    let mut idx: Vec<usize> = (0..per).collect();
                    // Stable on ties: lower index wins.
                    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
                    let mut m = vec![false; per];
                    for &i in idx.iter().take(k) {
                        m[i] = true;
                    }
                    m
                }
            };
            keep.into_iter().enumerate().map(|(i, b)| b || i == best).collect()
        })
        .collect();
    let mut sub = net.clone();
    sub.set_mask(mask)?;
    Ok(SubNet {
        net: sub,
        policy,
        report_seed: report.seed,
        report_permutations: report.n_permutations,
    })
}

/// Trains the active cells and head of a copy of `sub` for `epochs`, with
/// every active cell in every batch.
pub fn finetune(sub: &SubNet, train: &[Labeled], val: &[Labeled], epochs: usize, hyper: &NasHyper) -> Result<(SubNet, Vec<NasEpoch>), NasError> {
    if epochs == 0 {
        return Err(NasError::ZeroEpochs);
    }
    let mut out = sub.clone();
    let h = NasHyper {
        epochs,
        cell_dropout: 0.0,
        ..*hyper
    };
    let history = train_supernet(&mut out.net, train, val, &h)?;
    debug_assert_eq!(out.net.mask(), sub.net.mask());
    Ok((out, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nas::{build_supernet, CellKind};
    use crate::rng::SplitMix64;

    fn report(net: &SuperNet, seed: u64) -> ShapleyReport {
        let mut rng = SplitMix64::new(seed);
        ShapleyReport {
            phi: (0..net.n_cells()).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            kinds: net.layers.iter().flatten().map(|c| c.kind).collect(),
            cells_per_layer: 6,
            n_permutations: 10,
            seed,
            v_empty: 0.5,
            v_full: 0.9,
        }
    }

    #[test]
    fn threshold_extremes() {
        let net = build_supernet(32, 0).unwrap();
        let r = report(&net, 1);
        let all = prune(&net, &r, PrunePolicy::Threshold(f64::NEG_INFINITY)).unwrap();
        assert_eq!(all.net().active_count(), 96);
        let one = prune(&net, &r, PrunePolicy::Threshold(f64::INFINITY)).unwrap();
        assert_eq!(one.net().active_count(), 16);
        for (l, row) in one.net().mask().iter().enumerate() {
            let phis: Vec<f64> = (0..6).map(|c| r.phi_at(l, c)).collect();
            let best = phis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let kept = row.iter().position(|&b| b).unwrap();
            assert_eq!(phis[kept], best);
        }
        let zero = prune(&net, &r, PrunePolicy::Threshold(0.0)).unwrap();
        for (i, &on) in zero.net().flat_mask().iter().enumerate() {
            if r.phi[i] >= 0.0 {
                assert!(on);
            }
        }
        assert!(zero.pruned_fraction() > 0.0);
    }

    #[test]
    fn top_k() {
        let net = build_supernet(32, 0).unwrap();
        let r = report(&net, 2);
        for k in 0..=6 {
            let s = prune(&net, &r, PrunePolicy::TopK(k)).unwrap();
            assert_eq!(s.net().active_count(), 16 * k.max(1));
        }
    }

    #[test]
    fn finetune_keeps_mask_and_masked_weights() {
        let net = build_supernet(16, 3).unwrap();
        let r = report(&net, 3);
        let sub = prune(&net, &r, PrunePolicy::Threshold(0.0)).unwrap();
        let mut rng = SplitMix64::new(4);
        let data: Vec<Labeled> = (0..24)
            .map(|i| ((0..16).map(|d| if d % 2 == 0 { i as f64 % 2.0 - 0.5 } else { 0.0 } + 0.1 * rng.normal()).collect(), i % 2))
            .collect();
        let (tuned, hist) = finetune(&sub, &data, &[], 3, &NasHyper::default()).unwrap();
        assert_eq!(hist.len(), 4);
        assert_eq!(tuned.net().mask(), sub.net().mask());
        for (l, row) in sub.net().mask().iter().enumerate() {
            for (c, &on) in row.iter().enumerate() {
                let same = tuned.net().layers[l][c] == sub.net().layers[l][c];
                let trainable = sub.net().layers[l][c].kind != CellKind::MaxPool
                    && sub.net().layers[l][c].kind != CellKind::AvgPool
                    && sub.net().layers[l][c].kind != CellKind::Identity;
                if !on {
                    assert!(same, "masked cell {l},{c} changed");
                } else if trainable {
                    assert!(!same, "active cell {l},{c} did not train");
                }
            }
        }
        assert_eq!(finetune(&sub, &data, &[], 0, &NasHyper::default()), Err(NasError::ZeroEpochs));
    }
}
