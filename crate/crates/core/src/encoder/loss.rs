// SPDX-License-Identifier: Apache-2.0

use super::EncoderError;

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn same_len(a: &[f64], others: &[Vec<f64>]) -> Result<(), EncoderError> {
    if others.is_empty() {
        return Err(EncoderError::EmptyList);
    }
    match others.iter().find(|o| o.len() != a.len()) {
        Some(o) => Err(EncoderError::Length(a.len(), o.len())),
        None => Ok(()),
    }
}

/// `Σᵢ ‖z_a − z_pᵢ‖²`.
pub fn loss_positive(z_a: &[f64], z_pos: &[Vec<f64>]) -> Result<f64, EncoderError> {
    same_len(z_a, z_pos)?;
    Ok(z_pos.iter().map(|p| sq_dist(z_a, p)).sum())
}

/// `Σᵢ max(0, m − ‖z_a − z_nᵢ‖²)`.
pub fn loss_negative(z_a: &[f64], z_neg: &[Vec<f64>], margin: f64) -> Result<f64, EncoderError> {
    if margin <= 0.0 || margin.is_nan() {
        return Err(EncoderError::Margin(margin));
    }
    same_len(z_a, z_neg)?;
    Ok(z_neg.iter().map(|n| (margin - sq_dist(z_a, n)).max(0.0)).sum())
}

/// Per-class means `(μ₀, μ₁)`.
pub fn centroids(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<[Vec<f64>; 2], EncoderError> {
    let dim = embeddings.first().ok_or(EncoderError::EmptyList)?.len();
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (z, &k) in embeddings.iter().zip(labels) {
        if k > 1 {
            return Err(EncoderError::NoCentroid(k));
        }
        if z.len() != dim {
            return Err(EncoderError::Length(dim, z.len()));
        }
        counts[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(z) {
            *s += v;
        }
    }
    for k in 0..2 {
        if counts[k] == 0 {
            return Err(EncoderError::ClassAbsent(k));
        }
        for s in sums[k].iter_mut() {
            *s /= counts[k] as f64;
        }
    }
    Ok(sums)
}

/// `Σ ‖z − μ_{label}‖²` over all embeddings. `centroids[k]` may be empty
/// for a class that has no members, which is only an error if that label occurs.
pub fn loss_global(embeddings: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> Result<f64, EncoderError> {
    let mut total = 0.0;
    for (z, &k) in embeddings.iter().zip(labels) {
        let mu = centroids.get(k).filter(|c| !c.is_empty()).ok_or(EncoderError::NoCentroid(k))?;
        if mu.len() != z.len() {
            return Err(EncoderError::Length(mu.len(), z.len()));
        }
        total += sq_dist(z, mu);
    }
    Ok(total)
}
