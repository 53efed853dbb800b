// SPDX-License-Identifier: Apache-2.0

use super::EvalError;

const MAX_ITERS: usize = 1000;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca2D {
    pub coords: Vec<[f64; 2]>,
    pub components: [Vec<f64>; 2],
    /// Share of total variance carried by each component.
    pub explained: [f64; 2],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(c: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    c.iter().map(|row| dot(row, v)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn project_out(v: &mut [f64], u: Option<&[f64]>) {
    if let Some(u) = u {
        let k = dot(v, u);
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= k * b);
    }
}

/// Dominant eigenpair of a symmetric PSD matrix, restricted to the
/// complement of `orth` when given.
fn power_iteration(c: &[Vec<f64>], orth: Option<&[f64]>) -> (f64, Vec<f64>) {
    let d = c.len();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 / d as f64).collect();
    project_out(&mut v, orth);
    // The fixed start can lie along `orth`; fall back to basis vectors.
    let mut k = 0;
    while normalize(&mut v) < 1e-8 && k < d {
        v = vec![0.0; d];
        v[k] = 1.0;
        project_out(&mut v, orth);
        k += 1;
    }
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERS {
        let mut w = mat_vec(c, &v);
        project_out(&mut w, orth);
        lambda = dot(&v, &w);
        let residual: f64 = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if residual < RESIDUAL_TOL {
            break;
        }
        if normalize(&mut w) == 0.0 {
            return (0.0, v);
        }
        v = w;
    }
    (lambda.max(0.0), v)
}

/// First nonzero coordinate made positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(&x) = v.iter().find(|x| x.abs() > 1e-12) {
        if x < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
    }
}

/// Projection onto the top two principal directions, found by power
/// iteration with deflation on the sample covariance.
pub fn pca2d(embeddings: &[Vec<f64>]) -> Result<Pca2D, EvalError> {
    let n = embeddings.len();
    if n < 3 {
        return Err(EvalError::Degenerate(format!("PCA needs at least 3 samples, got {n}")));
    }
    let d = embeddings[0].len();
    if d < 2 {
        return Err(EvalError::Degenerate("PCA needs dimension ≥ 2".into()));
    }
    if let Some(e) = embeddings.iter().find(|e| e.len() != d) {
        return Err(EvalError::Length(d, e.len()));
    }
    let mut mean = vec![0.0; d];
    for e in embeddings {
        for (m, x) in mean.iter_mut().zip(e) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = embeddings.iter().map(|e| e.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for x in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i][j] += x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    if trace <= 0.0 {
        return Err(EvalError::Degenerate("all points are identical".into()));
    }
    let (l1, mut v1) = power_iteration(&cov, None);
    for i in 0..d {
        for j in 0..d {
            cov[i][j] -= l1 * v1[i] * v1[j];
        }
    }
    let (l2, mut v2) = power_iteration(&cov, Some(&v1));
    fix_sign(&mut v1);
    fix_sign(&mut v2);
    let coords = centered.iter().map(|x| [dot(x, &v1), dot(x, &v2)]).collect();
    Ok(Pca2D {
        coords,
        components: [v1, v2],
        explained: [(l1 / trace).clamp(0.0, 1.0), (l2 / trace).clamp(0.0, 1.0)],
    })
}
