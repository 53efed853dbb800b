// SPDX-License-Identifier: Apache-2.0

//! Forward/backward pairs. Backward functions take the upstream gradient and
//! whatever forward values they need, and return input gradients.

use super::{Matrix, TensorError};

/// `(dA, dB)` for `C = A·B`.
pub fn matmul_backward(a: &Matrix, b: &Matrix, dc: &Matrix) -> Result<(Matrix, Matrix), TensorError> {
    Ok((dc.matmul_nt(b)?, a.matmul_tn(dc)?))
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient through ReLU given the forward *input* (subgradient 0 at 0).
pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Result<Matrix, TensorError> {
    if x.shape() != dy.shape() {
        return Err(TensorError::Shape {
            op: "relu_backward",
            left: x.shape(),
            right: dy.shape(),
        });
    }
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(|v| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

/// Gradient through sigmoid given the forward *output*.
pub fn sigmoid_backward(y: &Matrix, dy: &Matrix) -> Result<Matrix, TensorError> {
    zip_with("sigmoid_backward", y, dy, |s, g| g * s * (1.0 - s))
}

pub fn tanh(x: &Matrix) -> Matrix {
    x.map(f64::tanh)
}

/// Gradient through tanh given the forward *output*.
pub fn tanh_backward(y: &Matrix, dy: &Matrix) -> Result<Matrix, TensorError> {
    zip_with("tanh_backward", y, dy, |t, g| g * (1.0 - t * t))
}

fn zip_with(op: &'static str, a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// Sums over rows: `(n × c) → (1 × c)`.
pub fn row_sum(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, x.cols());
    for r in 0..x.rows() {
        for (o, v) in out.data_mut().iter_mut().zip(x.row(r)) {
            *o += v;
        }
    }
    out
}

/// Broadcasts the `(1 × c)` upstream gradient back over `rows` rows.
pub fn row_sum_backward(dy: &Matrix, rows: usize) -> Matrix {
    let mut out = Matrix::zeros(rows, dy.cols());
    for r in 0..rows {
        out.row_mut(r).copy_from_slice(dy.row(0));
    }
    out
}

/// `x + b` with `b` of shape `(1 × c)` broadcast over rows.
pub fn add_bias(x: &Matrix, b: &Matrix) -> Result<Matrix, TensorError> {
    if b.rows() != 1 || b.cols() != x.cols() {
        return Err(TensorError::Shape {
            op: "add_bias",
            left: x.shape(),
            right: b.shape(),
        });
    }
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (o, v) in out.row_mut(r).iter_mut().zip(b.row(0)) {
            *o += v;
        }
    }
    Ok(out)
}

/// `(dx, db)` for [`add_bias`].
pub fn add_bias_backward(dy: &Matrix) -> (Matrix, Matrix) {
    (dy.clone(), row_sum(dy))
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Mean softmax cross-entropy over the batch, and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix), TensorError> {
    if labels.len() != logits.rows() {
        return Err(TensorError::Shape {
            op: "softmax_cross_entropy",
            left: logits.shape(),
            right: (labels.len(), 1),
        });
    }
    let classes = logits.cols();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(TensorError::LabelOutOfRange { label, classes });
    }
    let n = logits.rows().max(1) as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        let g = grad.row_mut(r);
        g[label] -= 1.0;
        for v in g.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::tensor::{gradient_check, Param};
    use proptest::prelude::*;

    fn rand_matrix(rng: &mut SplitMix64, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    fn dot(a: &Matrix, b: &Matrix) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn scalar_activations() {
        let x = Matrix::from_rows(&[&[-1.0, 2.0, 0.0]]);
        assert_eq!(relu(&x), Matrix::from_rows(&[&[0.0, 2.0, 0.0]]));
        assert_eq!(sigmoid(&Matrix::zeros(1, 1)).get(0, 0), 0.5);
        assert_eq!(tanh(&Matrix::zeros(1, 1)).get(0, 0), 0.0);
    }

    #[test]
    fn softmax_ce_is_stable_when_saturated() {
        let (loss, grad) = softmax_cross_entropy(&Matrix::from_rows(&[&[1000.0, -1000.0]]), &[0]).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-12);
        assert!(grad.is_finite());
        let (loss, _) = softmax_cross_entropy(&Matrix::from_rows(&[&[1000.0, -1000.0]]), &[1]).unwrap();
        assert!((loss - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_ce_uniform_logits_is_ln_classes() {
        for c in 2..6 {
            let (loss, _) = softmax_cross_entropy(&Matrix::filled(3, c, 0.7), &[0, 1, c - 1]).unwrap();
            assert!((loss - (c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_ce_errors() {
        let l = Matrix::zeros(2, 2);
        assert!(matches!(softmax_cross_entropy(&l, &[0, 2]), Err(TensorError::LabelOutOfRange { label: 2, classes: 2 })));
        assert!(matches!(softmax_cross_entropy(&l, &[0]), Err(TensorError::Shape { .. })));
    }

    /// Checks one backward rule with the scalar objective `⟨G, f(x)⟩` for a fixed random `G`.
    fn check_unary(
        rng: &mut SplitMix64,
        r: usize,
        c: usize,
        fwd: impl Fn(&Matrix) -> Matrix,
        bwd: impl Fn(&Matrix, &Matrix, &Matrix) -> Matrix,
    ) -> f64 {
        let x = rand_matrix(rng, r, c);
        let g = rand_matrix(rng, r, c);
        let y = fwd(&x);
        let mut p = [Param::new(x.clone())];
        p[0].grad = bwd(&x, &y, &g);
        gradient_check(&mut p, 1e-5, |ps| dot(&g, &fwd(&ps[0].value))).max_rel_error
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn backward_rules_pass_gradient_check(seed in any::<u64>(), r in 1usize..=16, c in 1usize..=16, k in 1usize..=16) {
            let mut rng = SplitMix64::new(seed);
            // matmul: objective ⟨G, A·B⟩
            let a = rand_matrix(&mut rng, r, k);
            let b = rand_matrix(&mut rng, k, c);
            let g = rand_matrix(&mut rng, r, c);
            let (da, db) = matmul_backward(&a, &b, &g).unwrap();
            let mut ps = [Param::new(a), Param::new(b)];
            ps[0].grad = da;
            ps[1].grad = db;
            let e = gradient_check(&mut ps, 1e-5, |p| dot(&g, &p[0].value.matmul(&p[1].value).unwrap())).max_rel_error;
            prop_assert!(e <= 1e-4, "matmul {e}");

            let e = check_unary(&mut rng, r, c, sigmoid, |_, y, g| sigmoid_backward(y, g).unwrap());
            prop_assert!(e <= 1e-4, "sigmoid {e}");
            let e = check_unary(&mut rng, r, c, tanh, |_, y, g| tanh_backward(y, g).unwrap());
            prop_assert!(e <= 1e-4, "tanh {e}");
            let e = check_unary(&mut rng, r, c, relu, |x, _, g| relu_backward(x, g).unwrap());
            prop_assert!(e <= 1e-4, "relu {e}");

            // row_sum: objective ⟨g, 1ᵀX⟩
            let x = rand_matrix(&mut rng, r, c);
            let g1 = rand_matrix(&mut rng, 1, c);
            let mut ps = [Param::new(x)];
            ps[0].grad = row_sum_backward(&g1, r);
            let e = gradient_check(&mut ps, 1e-5, |p| dot(&g1, &row_sum(&p[0].value))).max_rel_error;
            prop_assert!(e <= 1e-4, "row_sum {e}");

            // add_bias
            let x = rand_matrix(&mut rng, r, c);
            let bias = rand_matrix(&mut rng, 1, c);
            let g = rand_matrix(&mut rng, r, c);
            let (dx, dbias) = add_bias_backward(&g);
            let mut ps = [Param::new(x), Param::new(bias)];
            ps[0].grad = dx;
            ps[1].grad = dbias;
            let e = gradient_check(&mut ps, 1e-5, |p| dot(&g, &add_bias(&p[0].value, &p[1].value).unwrap())).max_rel_error;
            prop_assert!(e <= 1e-4, "add_bias {e}");

            // softmax cross-entropy over c ≥ 2 classes
            let classes = c.max(2);
            let logits = rand_matrix(&mut rng, r, classes).scale(3.0);
            let labels: Vec<usize> = (0..r).map(|_| rng.below(classes)).collect();
            let (loss, dl) = softmax_cross_entropy(&logits, &labels).unwrap();
            prop_assert!(loss >= 0.0);
            let mut ps = [Param::new(logits)];
            ps[0].grad = dl;
            let e = gradient_check(&mut ps, 1e-5, |p| softmax_cross_entropy(&p[0].value, &labels).unwrap().0).max_rel_error;
            prop_assert!(e <= 1e-4, "softmax_ce {e}");
        }
    }
}
