// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;

use super::supernet::{accuracy_masked, Labeled, SuperNet};
use super::{CellKind, NasError};
use crate::rng::{derive_seed, SplitMix64};

pub const EXACT_SHAPLEY_LIMIT: usize = 12;

/// A cooperative game over `n_players()` players.
pub trait CoalitionGame: Sync {
    fn n_players(&self) -> usize;

    fn value(&self, coalition: &[bool]) -> f64;

    /// Marginal contribution of each player when they join in `order`,
    /// indexed by player. Games with cheap incremental evaluation override this.
    fn walk(&self, order: &[usize]) -> Vec<f64> {
        let n = self.n_players();
        let mut s = vec![false; n];
        let mut prev = self.value(&s);
        let mut out = vec![0.0; n];
        for &p in order {
            s[p] = true;
            let v = self.value(&s);
            out[p] = v - prev;
            prev = v;
        }
        out
    }
}

/// Weighted-marginal formula over every coalition.
pub fn exact_shapley(game: &dyn CoalitionGame) -> Result<Vec<f64>, NasError> {
    let n = game.n_players();
    if n > EXACT_SHAPLEY_LIMIT {
        return Err(NasError::TooManyPlayers(n));
    }
    let size = 1usize << n;
    let values: Vec<f64> = (0..size)
        .into_par_iter()
        .map(|bits| {
            let s: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            game.value(&s)
        })
        .collect();
    // w[k] = k! (n-k-1)! / n!
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        for bits in 0..size {
            if bits >> i & 1 == 0 {
                let k = (bits as u64).count_ones() as usize;
                let w = fact[k] * fact[n - k - 1] / fact[n];
                *p += w * (values[bits | 1 << i] - values[bits]);
            }
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyEstimate {
    pub phi: Vec<f64>,
    pub n_permutations: usize,
    pub seed: u64,
    pub v_empty: f64,
    pub v_full: f64,
}

/// Permutation sampling with antithetic pairs: each drawn order is also
/// walked in reverse. An odd count leaves the last draw unpaired.
pub fn monte_carlo_shapley(game: &dyn CoalitionGame, n_permutations: usize, seed: u64) -> Result<ShapleyEstimate, NasError> {
    if n_permutations == 0 {
        return Err(NasError::ZeroPermutations);
    }
    let n = game.n_players();
    let draws = n_permutations.div_ceil(2);
    let per_draw: Vec<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = SplitMix64::new(derive_seed(seed, d as u64));
            let order = rng.permutation(n);
            let mut m = game.walk(&order);
            if 2 * d + 1 < n_permutations {
                let rev: Vec<usize> = order.iter().rev().copied().collect();
                for (a, b) in m.iter_mut().zip(game.walk(&rev)) {
                    *a += b;
                }
            }
            m
        })
        .collect();
    let mut phi = vec![0.0; n];
    for m in &per_draw {
        for (p, v) in phi.iter_mut().zip(m) {
            *p += v;
        }
    }
    phi.iter_mut().for_each(|p| *p /= n_permutations as f64);
    Ok(ShapleyEstimate {
        phi,
        n_permutations,
        seed,
        v_empty: game.value(&vec![false; n]),
        v_full: game.value(&vec![true; n]),
    })
}

/// Players are the cells of a SuperNet in layer-major order and the value of
/// a coalition is the accuracy with exactly those cells active.
pub struct SuperNetGame<'a> {
    pub net: &'a SuperNet,
    pub data: &'a [Labeled],
}

impl SuperNetGame<'_> {
    fn mask_of(&self, coalition: &[bool]) -> Vec<Vec<bool>> {
        coalition.chunks(self.net.cells_per_layer()).map(<[bool]>::to_vec).collect()
    }
}

fn hits(logits: &[f64], label: usize) -> usize {
    usize::from(usize::from(logits[1] > logits[0]) == label)
}

impl CoalitionGame for SuperNetGame<'_> {
    fn n_players(&self) -> usize {
        self.net.n_cells()
    }

    fn value(&self, coalition: &[bool]) -> f64 {
        accuracy_masked(self.net, self.data, &self.mask_of(coalition)).expect("validated game data")
    }

    /// Keeps every sample's layer inputs and recomputes only from the layer
    /// whose cell joined.
    fn walk(&self, order: &[usize]) -> Vec<f64> {
        let net = self.net;
        let per = net.cells_per_layer();
        let mut mask = vec![vec![false; per]; net.layers.len()];
        let mut acts: Vec<Vec<Vec<f64>>> = self
            .data
            .iter()
            .map(|(x, _)| {
                let mut a = vec![Vec::new(); net.layers.len() + 1];
                a[0] = x.clone();
                a
            })
            .collect();
        let mut correct = 0usize;
        for (a, (_, y)) in acts.iter_mut().zip(self.data) {
            correct += hits(&net.forward_from(&mask, a, 0), *y);
        }
        let total = self.data.len() as f64;
        let mut prev = correct as f64 / total;
        let mut out = vec![0.0; order.len()];
        for &p in order {
            let (l, c) = (p / per, p % per);
            mask[l][c] = true;
            let mut correct = 0usize;
            for (a, (_, y)) in acts.iter_mut().zip(self.data) {
                correct += hits(&net.forward_from(&mask, a, l), *y);
            }
            let v = correct as f64 / total;
            out[p] = v - prev;
            prev = v;
        }
        out
    }
}

/// Per-cell φ on the SuperNet grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyReport {
    /// Layer-major, one entry per cell.
    pub phi: Vec<f64>,
    pub kinds: Vec<CellKind>,
    pub cells_per_layer: usize,
    pub n_permutations: usize,
    pub seed: u64,
    pub v_empty: f64,
    pub v_full: f64,
}

impl ShapleyReport {
    pub const CSV_HEADER: &'static str = "layer,cell,kind,phi";

    pub fn phi_at(&self, layer: usize, cell: usize) -> f64 {
        self.phi[layer * self.cells_per_layer + cell]
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for (i, (phi, kind)) in self.phi.iter().zip(&self.kinds).enumerate() {
            s.push_str(&format!("{},{},{},{}\n", i / self.cells_per_layer, i % self.cells_per_layer, kind, phi));
        }
        s
    }

    /// Reads the CSV back; run metadata is not part of it and comes from the caller.
    pub fn phi_from_csv(text: &str) -> Result<Vec<(usize, usize, CellKind, f64)>, NasError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| NasError::Degenerate(format!("shapley csv line {}: {m}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            out.push((
                f[0].parse().map_err(|_| bad("layer"))?,
                f[1].parse().map_err(|_| bad("cell"))?,
                f[2].parse().map_err(|e: String| bad(&e))?,
                f[3].parse().map_err(|_| bad("phi"))?,
            ));
        }
        Ok(out)
    }
}

pub fn shapley_estimate(net: &SuperNet, val: &[Labeled], n_permutations: usize, seed: u64) -> Result<ShapleyReport, NasError> {
    if val.is_empty() {
        return Err(NasError::EmptyValidation);
    }
    for (x, y) in val {
        if x.len() != net.input_len {
            return Err(NasError::Length {
                expected: net.input_len,
                got: x.len(),
            });
        }
        if *y > 1 {
            return Err(NasError::Degenerate(format!("label {y}")));
        }
    }
    let game = SuperNetGame { net, data: val };
    let est = monte_carlo_shapley(&game, n_permutations, seed)?;
    Ok(ShapleyReport {
        phi: est.phi,
        kinds: net.layers.iter().flatten().map(|c| c.kind).collect(),
        cells_per_layer: net.cells_per_layer(),
        n_permutations,
        seed,
        v_empty: est.v_empty,
        v_full: est.v_full,
    })
}
