// SPDX-License-Identifier: Apache-2.0

use super::{Matrix, Param};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are bound to parameters by position.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<(Matrix, Matrix)>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients. Gradients are left
    /// as they are; callers zero them before the next batch.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| {
                    let (r, c) = p.shape();
                    (Matrix::zeros(r, c), Matrix::zeros(r, c))
                })
                .collect();
        }
        assert_eq!(self.moments.len(), params.len(), "parameter set changed between steps");
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            assert_eq!(p.shape(), m.shape(), "moment shape");
            let g = p.grad.data();
            let w = p.value.data_mut();
            for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam(AdamConfig),
    /// Plain `θ ← θ − lr·∇θ`.
    Sgd { lr: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam(AdamConfig::default())
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(Adam),
    Sgd { lr: f64, step: u64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Adam(c) => Optimizer::Adam(Adam::new(c)),
            OptimizerKind::Sgd { lr } => Optimizer::Sgd { lr, step: 0 },
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        match self {
            Optimizer::Adam(a) => a.step(params),
            Optimizer::Sgd { lr, step } => {
                *step += 1;
                for p in params.iter_mut() {
                    let g = p.grad.data().to_vec();
                    for (w, g) in p.value.data_mut().iter_mut().zip(g) {
                        *w -= *lr * g;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut p = Param::new(Matrix::from_rows(&[&[1.5, -2.0]]));
        let before = p.value.clone();
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..10 {
            adam.step(&mut [&mut p]);
        }
        assert_eq!(p.value, before);
    }

    #[test]
    fn step_count_increments_by_one() {
        let mut p = Param::new(Matrix::zeros(2, 2));
        let mut adam = Adam::new(AdamConfig::default());
        for k in 1..=5 {
            adam.step(&mut [&mut p]);
            assert_eq!(adam.step_count(), k);
        }
    }

    #[test]
    fn constant_gradient_moves_by_lr_per_step() {
        // With constant g, bias-corrected m̂ = g and v̂ = g² exactly, so each
        // step is lr·g/(|g| + eps) ≈ lr·sign(g).
        for &g in &[3.0, -0.02, 1e-3] {
            let mut p = Param::new(Matrix::zeros(1, 1));
            p.grad = Matrix::from_rows(&[&[g]]);
            let cfg = AdamConfig::default();
            let mut adam = Adam::new(cfg);
            let mut last = 0.0;
            for _ in 0..200 {
                adam.step(&mut [&mut p]);
                let w = p.value.get(0, 0);
                let expected = cfg.lr * g.abs() / (g.abs() + cfg.eps);
                assert!(((last - w) * g.signum() - expected).abs() < 1e-12);
                last = w;
            }
            assert_eq!(p.grad.get(0, 0), g, "grads untouched");
        }
    }

    #[test]
    fn sgd_is_plain_descent() {
        let mut p = Param::new(Matrix::from_rows(&[&[1.0]]));
        p.grad = Matrix::from_rows(&[&[0.5]]);
        let mut opt = Optimizer::new(OptimizerKind::Sgd { lr: 0.1 });
        opt.step(&mut [&mut p]);
        assert!((p.value.get(0, 0) - 0.95).abs() < 1e-15);
    }
}
