// SPDX-License-Identifier: Apache-2.0

use super::cell::{fan_in_uniform, Cell, CellKind};
use super::NasError;
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::{Adam, AdamConfig, Matrix, Param};

/// An embedding and its class (1 = Trojan).
pub type Labeled = (Vec<f64>, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NasShape {
    pub layers: usize,
    /// Cell kinds of every layer, in order.
    pub kinds: Vec<CellKind>,
    /// 1-based layers that halve the length.
    pub pool_layers: Vec<usize>,
}

impl Default for NasShape {
    fn default() -> Self {
        Self {
            layers: 16,
            kinds: CellKind::ALL.to_vec(),
            pool_layers: vec![4, 8, 12],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperNet {
    pub input_len: usize,
    pub shape: NasShape,
    pub layers: Vec<Vec<Cell>>,
    pub head_w: Param,
    pub head_b: Param,
    pub(crate) mask: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NasHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Per-batch probability of leaving an active cell out while training,
    /// so that sub-coalitions of the shared weights stay usable.
    pub cell_dropout: f64,
}

impl Default for NasHyper {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            seed: 0,
            cell_dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NasEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    /// NaN when no validation set was given.
    pub val_acc: f64,
}

impl NasEpoch {
    pub const CSV_HEADER: &'static str = "epoch,loss,train_acc,val_acc";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.epoch, self.loss, self.train_acc, self.val_acc)
    }
}

/// Per-parameter gradient buffers mirroring a [`SuperNet`].
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub cells: Vec<Vec<Vec<Matrix>>>,
    pub head_w: Matrix,
    pub head_b: Matrix,
}

pub fn build_supernet(input_len: usize, seed: u64) -> Result<SuperNet, NasError> {
    SuperNet::new(input_len, NasShape::default(), seed)
}

fn two_way_softmax(l: &[f64]) -> [f64; 2] {
    let m = l[0].max(l[1]);
    let e0 = (l[0] - m).exp();
    let e1 = (l[1] - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

impl SuperNet {
    pub fn new(input_len: usize, shape: NasShape, seed: u64) -> Result<Self, NasError> {
        if shape.layers == 0 || shape.kinds.is_empty() {
            return Err(NasError::Degenerate("empty SuperNet shape".into()));
        }
        let mut rng = SplitMix64::new(derive_seed(seed, 0x5e7));
        let mut len = input_len;
        let mut layers = Vec::with_capacity(shape.layers);
        for l in 1..=shape.layers {
            let stride = if shape.pool_layers.contains(&l) { 2 } else { 1 };
            if len == 0 || (stride == 2 && len < 2) {
                return Err(NasError::InputTooShort(input_len));
            }
            let cells: Vec<Cell> = shape.kinds.iter().map(|&k| Cell::new(k, len, stride, &mut rng)).collect();
            len = cells[0].out_len;
            layers.push(cells);
        }
        let head_w = Param::new(fan_in_uniform(len, 2, len, &mut rng));
        let head_b = Param::new(Matrix::zeros(1, 2));
        let mask = vec![vec![true; shape.kinds.len()]; shape.layers];
        Ok(Self {
            input_len,
            shape,
            layers,
            head_w,
            head_b,
            mask,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn cells_per_layer(&self) -> usize {
        self.shape.kinds.len()
    }

    pub fn output_len(&self) -> usize {
        self.head_w.value.rows()
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.mask
    }

    /// Flat mask in layer-major order.
    pub fn flat_mask(&self) -> Vec<bool> {
        self.mask.iter().flatten().copied().collect()
    }

    pub fn set_mask(&mut self, mask: Vec<Vec<bool>>) -> Result<(), NasError> {
        if mask.len() != self.layers.len() || mask.iter().any(|r| r.len() != self.cells_per_layer()) {
            return Err(NasError::Degenerate("mask shape does not match the net".into()));
        }
        if let Some(l) = mask.iter().position(|r| !r.iter().any(|&b| b)) {
            return Err(NasError::NoActiveCell(l));
        }
        self.mask = mask;
        Ok(())
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().flatten().filter(|&&b| b).count()
    }

    /// Text grid, one layer per line, `1` for active cells.
    pub fn mask_grid(&self) -> String {
        let mut s = String::new();
        for row in &self.mask {
            s.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn parse_mask_grid(text: &str) -> Result<Vec<Vec<bool>>, NasError> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .chars()
                    .map(|c| match c {
                        '1' => Ok(true),
                        '0' => Ok(false),
                        _ => Err(NasError::Degenerate(format!("bad mask character `{c}`"))),
                    })
                    .collect()
            })
            .collect()
    }

    fn check_len(&self, x: &[f64]) -> Result<(), NasError> {
        if x.len() != self.input_len {
            return Err(NasError::Length {
                expected: self.input_len,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn layer_out(&self, l: usize, x: &[f64], active: &[bool]) -> Vec<f64> {
        let cells = &self.layers[l];
        let mut y = vec![0.0; cells[0].out_len];
        let n = active.iter().filter(|&&b| b).count();
        if n == 0 {
            return y;
        }
        for (c, _) in cells.iter().zip(active).filter(|(_, &a)| a) {
            for (acc, v) in y.iter_mut().zip(c.forward(x)) {
                *acc += v;
            }
        }
        let inv = 1.0 / n as f64;
        y.iter_mut().for_each(|v| *v *= inv);
        y
    }

    /// Mean of the active cells of layer `l`.
    pub fn layer_forward(&self, l: usize, x: &[f64], active: &[bool]) -> Result<Vec<f64>, NasError> {
        if !active.iter().any(|&b| b) {
            return Err(NasError::NoActiveCell(l));
        }
        if x.len() != self.layers[l][0].in_len {
            return Err(NasError::Length {
                expected: self.layers[l][0].in_len,
                got: x.len(),
            });
        }
        Ok(self.layer_out(l, x, active))
    }

    fn head(&self, h: &[f64]) -> Vec<f64> {
        let mut out = self.head_b.value.data().to_vec();
        for (i, &hi) in h.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.head_w.value.row(i)) {
                *o += hi * w;
            }
        }
        out
    }

    /// Recomputes `acts[l + 1..]` from `acts[start]` under `mask` and returns
    /// the logits. `acts[0]` is the input; a layer with no active cell
    /// outputs zeros.
    pub(crate) fn forward_from(&self, mask: &[Vec<bool>], acts: &mut [Vec<f64>], start: usize) -> Vec<f64> {
        for l in start..self.layers.len() {
            acts[l + 1] = self.layer_out(l, &acts[l], &mask[l]);
        }
        self.head(&acts[self.layers.len()])
    }

    /// Layer inputs (and final output) under an arbitrary mask.
    pub fn activations(&self, x: &[f64], mask: &[Vec<bool>]) -> Result<(Vec<Vec<f64>>, Vec<f64>), NasError> {
        self.check_len(x)?;
        let mut acts = vec![Vec::new(); self.layers.len() + 1];
        acts[0] = x.to_vec();
        let logits = self.forward_from(mask, &mut acts, 0);
        Ok((acts, logits))
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, NasError> {
        Ok(self.activations(x, &self.mask)?.1)
    }

    pub fn logits_masked(&self, x: &[f64], mask: &[Vec<bool>]) -> Result<Vec<f64>, NasError> {
        Ok(self.activations(x, mask)?.1)
    }

    /// `(label, score)`: argmax of the softmax with ties going to 0.
    pub fn classify(&self, z: &[f64]) -> Result<(usize, f64), NasError> {
        let p = two_way_softmax(&self.logits(z)?);
        let label = usize::from(p[1] > p[0]);
        Ok((label, p[label]))
    }

    pub fn accuracy(&self, data: &[Labeled]) -> Result<f64, NasError> {
        accuracy_masked(self, data, &self.mask)
    }

    pub fn zero_grads(&self) -> NetGrads {
        NetGrads {
            cells: self
                .layers
                .iter()
                .map(|cells| {
                    cells
                        .iter()
                        .map(|c| c.params.iter().map(|p| Matrix::zeros(p.shape().0, p.shape().1)).collect())
                        .collect()
                })
                .collect(),
            head_w: Matrix::zeros(self.head_w.shape().0, self.head_w.shape().1),
            head_b: Matrix::zeros(1, 2),
        }
    }

    /// Cross-entropy of one sample; gradients are accumulated scaled by `weight`.
    pub fn sample_backward(&self, x: &[f64], label: usize, weight: f64, grads: &mut NetGrads) -> Result<(f64, usize), NasError> {
        self.sample_backward_masked(x, label, weight, &self.mask, grads)
    }

    /// As [`Self::sample_backward`] under an explicit mask.
    pub fn sample_backward_masked(
        &self,
        x: &[f64],
        label: usize,
        weight: f64,
        mask: &[Vec<bool>],
        grads: &mut NetGrads,
    ) -> Result<(f64, usize), NasError> {
        let (acts, logits) = self.activations(x, mask)?;
        let p = two_way_softmax(&logits);
        let loss = -p[label].max(f64::MIN_POSITIVE).ln();
        let pred = usize::from(p[1] > p[0]);
        let dlogit = [weight * (p[0] - f64::from(label == 0)), weight * (p[1] - f64::from(label == 1))];

        let last = &acts[self.layers.len()];
        let mut dh = vec![0.0; last.len()];
        for (i, &hi) in last.iter().enumerate() {
            let w = self.head_w.value.row(i);
            let g = grads.head_w.row_mut(i);
            for k in 0..2 {
                g[k] += hi * dlogit[k];
                dh[i] += w[k] * dlogit[k];
            }
        }
        for k in 0..2 {
            grads.head_b.data_mut()[k] += dlogit[k];
        }
        for l in (0..self.layers.len()).rev() {
            let active = &mask[l];
            let n = active.iter().filter(|&&b| b).count();
            let mut dx = vec![0.0; self.layers[l][0].in_len];
            if n > 0 {
                let dy: Vec<f64> = dh.iter().map(|d| d / n as f64).collect();
                for (c, cell) in self.layers[l].iter().enumerate() {
                    if active[c] {
                        let d = cell.backward(&acts[l], &dy, &mut grads.cells[l][c]);
                        for (a, b) in dx.iter_mut().zip(d) {
                            *a += b;
                        }
                    }
                }
            }
            dh = dx;
        }
        Ok((loss, pred))
    }

    /// Params of active cells then the head, in a fixed order.
    fn active_params_mut(&mut self) -> Vec<&mut Param> {
        let mask = &self.mask;
        let mut out: Vec<&mut Param> = Vec::new();
        for (cells, row) in self.layers.iter_mut().zip(mask) {
            for (cell, &on) in cells.iter_mut().zip(row) {
                if on {
                    out.extend(cell.params.iter_mut());
                }
            }
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    fn load_grads(&mut self, g: NetGrads) {
        for (cells, gl) in self.layers.iter_mut().zip(g.cells) {
            for (cell, gc) in cells.iter_mut().zip(gl) {
                for (p, gp) in cell.params.iter_mut().zip(gc) {
                    p.grad = gp;
                }
            }
        }
        self.head_w.grad = g.head_w;
        self.head_b.grad = g.head_b;
    }

    fn mean_loss(&self, data: &[Labeled]) -> Result<(f64, f64), NasError> {
        let mut sink = self.zero_grads();
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (x, y) in data {
            let (l, p) = self.sample_backward(x, *y, 0.0, &mut sink)?;
            loss += l;
            correct += usize::from(p == *y);
        }
        let n = data.len().max(1) as f64;
        Ok((loss / n, correct as f64 / n))
    }
}

pub(crate) fn accuracy_masked(net: &SuperNet, data: &[Labeled], mask: &[Vec<bool>]) -> Result<f64, NasError> {
    if data.is_empty() {
        return Err(NasError::EmptyValidation);
    }
    let mut correct = 0usize;
    for (x, y) in data {
        let l = net.logits_masked(x, mask)?;
        correct += usize::from(usize::from(l[1] > l[0]) == *y);
    }
    Ok(correct as f64 / data.len() as f64)
}

fn check_data(net: &SuperNet, data: &[Labeled]) -> Result<(), NasError> {
    let mut seen = [false; 2];
    for (x, y) in data {
        net.check_len(x)?;
        if *y > 1 {
            return Err(NasError::Degenerate(format!("label {y}")));
        }
        seen[*y] = true;
    }
    if !(seen[0] && seen[1]) {
        return Err(NasError::Degenerate("training data needs both classes".into()));
    }
    Ok(())
}

/// Keeps each active cell with probability `1 − p`; a layer that loses all
/// of them keeps one picked uniformly.
fn sample_mask(mask: &[Vec<bool>], p: f64, rng: &mut SplitMix64) -> Vec<Vec<bool>> {
    if p <= 0.0 {
        return mask.to_vec();
    }
    mask.iter()
        .map(|row| {
            let mut m: Vec<bool> = row.iter().map(|&on| on && rng.next_f64() >= p).collect();
            if !m.iter().any(|&b| b) {
                let active: Vec<usize> = (0..row.len()).filter(|&c| row[c]).collect();
                m[active[rng.below(active.len())]] = true;
            }
            m
        })
        .collect()
}

/// Mini-batch Adam on softmax cross-entropy, each batch under a sampled
/// sub-mask of the active cells. Only active cells and the head are
/// updated; epoch 0 in the history is the untrained state and training
/// statistics are measured under the sampled masks.
pub fn train_supernet(
    net: &mut SuperNet,
    train: &[Labeled],
    val: &[Labeled],
    hyper: &NasHyper,
) -> Result<Vec<NasEpoch>, NasError> {
    check_data(net, train)?;
    let val_acc = |net: &SuperNet| -> Result<f64, NasError> {
        if val.is_empty() {
            Ok(f64::NAN)
        } else {
            net.accuracy(val)
        }
    };
    let (loss0, acc0) = net.mean_loss(train)?;
    let mut history = vec![NasEpoch {
        epoch: 0,
        loss: loss0,
        train_acc: acc0,
        val_acc: val_acc(net)?,
    }];
    let mut adam = Adam::new(hyper.adam);
    let bs = hyper.batch_size.max(1);
    for epoch in 1..=hyper.epochs {
        let mut rng = SplitMix64::new(derive_seed(hyper.seed, epoch as u64));
        let order = rng.permutation(train.len());
        let mut loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(bs) {
            let mask = sample_mask(net.mask(), hyper.cell_dropout, &mut rng);
            let mut grads = net.zero_grads();
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let (l, p) = net.sample_backward_masked(&train[i].0, train[i].1, w, &mask, &mut grads)?;
                loss += l;
                correct += usize::from(p == train[i].1);
            }
            net.load_grads(grads);
            let mut params = net.active_params_mut();
            adam.step(&mut params);
        }
        history.push(NasEpoch {
            epoch,
            loss: loss / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            val_acc: val_acc(net)?,
        });
    }
    for p in net.active_params_mut() {
        p.zero_grad();
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradient_check;

    pub(crate) fn clusters(n: usize, dim: usize, sep: f64, seed: u64) -> Vec<Labeled> {
        let mut rng = SplitMix64::new(seed);
        (0..n)
            .map(|i| {
                let y = i % 2;
                let c = if y == 1 { sep } else { -sep };
                let x = (0..dim).map(|d| if d % 3 == 0 { c } else { 0.0 } + 0.3 * rng.normal()).collect();
                (x, y)
            })
            .collect()
    }

    fn small_shape() -> NasShape {
        NasShape {
            layers: 3,
            kinds: CellKind::ALL.to_vec(),
            pool_layers: vec![2],
        }
    }

    #[test]
    fn default_build() {
        let a = build_supernet(32, 5).unwrap();
        assert_eq!(a.n_cells(), 96);
        assert_eq!(a.layers.len(), 16);
        assert!(a.flat_mask().iter().all(|&b| b));
        assert_eq!(a.output_len(), 4);
        for (l, cells) in a.layers.iter().enumerate() {
            let kinds: Vec<CellKind> = cells.iter().map(|c| c.kind).collect();
            assert_eq!(kinds, CellKind::ALL.to_vec());
            let out = cells[0].out_len;
            assert!(cells.iter().all(|c| c.out_len == out && c.in_len == cells[0].in_len), "layer {l}");
        }
        assert_eq!(a, build_supernet(32, 5).unwrap());
        assert_ne!(a, build_supernet(32, 6).unwrap());
        assert!(build_supernet(8, 0).is_ok());
        assert_eq!(build_supernet(7, 0), Err(NasError::InputTooShort(7)));
    }

    #[test]
    fn layer_mean_rules() {
        let net = build_supernet(8, 1).unwrap();
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        let mut only_id = vec![false; 6];
        only_id[4] = true;
        assert_eq!(net.layer_forward(0, &x, &only_id).unwrap(), x);
        // max pool and identity agree on a constant vector
        let c = vec![0.7; 8];
        let mut two = vec![false; 6];
        two[2] = true;
        two[4] = true;
        assert_eq!(net.layer_forward(0, &c, &two).unwrap(), c);
        assert_eq!(net.layer_forward(0, &x, &[false; 6]), Err(NasError::NoActiveCell(0)));

        // Dropping a cell changes the mean exactly when its output differs from it.
        let all = vec![true; 6];
        let full = net.layer_forward(0, &x, &all).unwrap();
        for c in 0..6 {
            let mut m = all.clone();
            m[c] = false;
            let drop = net.layer_forward(0, &x, &m).unwrap();
            let own = net.layers[0][c].forward(&x);
            let differs = own.iter().zip(&full).any(|(a, b)| (a - b).abs() > 1e-12);
            let changed = drop.iter().zip(&full).any(|(a, b)| (a - b).abs() > 1e-12);
            assert_eq!(differs, changed, "cell {c}");
        }
    }

    #[test]
    fn net_gradients_check() {
        let mut net = SuperNet::new(8, small_shape(), 3).unwrap();
        let mut m = net.mask.clone();
        m[1][0] = false;
        net.set_mask(m).unwrap();
        for cells in net.layers.iter_mut() {
            cells[5].params[0].value = fan_in_uniform(1, cells[5].out_len, 1, &mut SplitMix64::new(9));
        }
        let data = clusters(4, 8, 0.5, 2);
        let mut grads = net.zero_grads();
        for (x, y) in &data {
            net.sample_backward(x, *y, 0.25, &mut grads).unwrap();
        }
        net.load_grads(grads);
        let template = net.clone();
        let mut flat: Vec<Param> = net.layers.iter().flatten().flat_map(|c| c.params.clone()).collect();
        flat.push(net.head_w.clone());
        flat.push(net.head_b.clone());
        let chk = gradient_check(&mut flat, 1e-6, |ps| {
            let mut n = template.clone();
            let mut it = ps.iter();
            for cell in n.layers.iter_mut().flatten() {
                for p in cell.params.iter_mut() {
                    *p = it.next().unwrap().clone();
                }
            }
            n.head_w = it.next().unwrap().clone();
            n.head_b = it.next().unwrap().clone();
            n.mean_loss(&data).unwrap().0
        });
        assert!(chk.max_rel_error <= 1e-5, "{chk:?}");
    }

    #[test]
    fn learns_separable_clusters() {
        let train = clusters(64, 32, 1.0, 11);
        let val = clusters(64, 32, 1.0, 12);
        let mut net = build_supernet(32, 4).unwrap();
        let hist = train_supernet(&mut net, &train, &val, &NasHyper::default()).unwrap();
        assert_eq!(hist.len(), 51);
        assert!((hist[0].loss - 2f64.ln()).abs() < 0.1, "{}", hist[0].loss);
        assert!(hist.last().unwrap().val_acc >= 0.95, "{:?}", hist.last());
    }

    #[test]
    fn zero_epochs_and_masked_cells_stay_put() {
        let train = clusters(16, 8, 1.0, 1);
        let mut net = SuperNet::new(8, small_shape(), 3).unwrap();
        let before = net.clone();
        let h = NasHyper {
            epochs: 0,
            ..NasHyper::default()
        };
        assert_eq!(train_supernet(&mut net, &train, &[], &h).unwrap().len(), 1);
        assert_eq!(net, before);

        let mut m = net.mask.clone();
        m[0][0] = false;
        m[2][1] = false;
        net.set_mask(m).unwrap();
        train_supernet(&mut net, &train, &[], &NasHyper { epochs: 3, ..h }).unwrap();
        assert_eq!(net.layers[0][0], before.layers[0][0]);
        assert_eq!(net.layers[2][1], before.layers[2][1]);
        assert_ne!(net.layers[0][1], before.layers[0][1]);
    }

    #[test]
    fn classify_rules() {
        let mut net = SuperNet::new(8, small_shape(), 3).unwrap();
        net.head_w.value.fill(0.0);
        let (label, score) = net.classify(&[0.3; 8]).unwrap();
        assert_eq!((label, score), (0, 0.5));
        let net = SuperNet::new(8, small_shape(), 3).unwrap();
        for (x, _) in clusters(20, 8, 1.0, 5) {
            let (label, score) = net.classify(&x).unwrap();
            assert!((0.5..=1.0).contains(&score));
            assert_eq!(net.classify(&x).unwrap(), (label, score));
            let l = net.logits(&x).unwrap();
            // argmax survives a strictly monotone map of both logits
            let t: Vec<f64> = l.iter().map(|v| (3.0 * v).exp()).collect();
            assert_eq!(usize::from(t[1] > t[0]), label);
        }
        assert!(matches!(net.classify(&[0.0; 3]), Err(NasError::Length { .. })));
    }

    #[test]
    fn mask_grid_round_trip() {
        let mut net = build_supernet(16, 0).unwrap();
        let mut m = net.mask.clone();
        m[3][2] = false;
        net.set_mask(m.clone()).unwrap();
        assert_eq!(SuperNet::parse_mask_grid(&net.mask_grid()).unwrap(), m);
        let mut bad = m;
        bad[0] = vec![false; 6];
        assert_eq!(net.set_mask(bad), Err(NasError::NoActiveCell(0)));
    }
}
