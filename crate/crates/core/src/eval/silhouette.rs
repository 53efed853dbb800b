// SPDX-License-Identifier: Apache-2.0

use super::EvalError;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette over all points with Euclidean distance, two classes.
pub fn silhouette(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<f64, EvalError> {
    if embeddings.len() != labels.len() {
        return Err(EvalError::Length(embeddings.len(), labels.len()));
    }
    let mut count = [0usize; 2];
    for &y in labels {
        if y > 1 {
            return Err(EvalError::Degenerate(format!("label {y}")));
        }
        count[y] += 1;
    }
    if count.iter().any(|&c| c < 2) {
        return Err(EvalError::Degenerate("silhouette needs two members per class".into()));
    }
    let mut total = 0.0;
    for (i, zi) in embeddings.iter().enumerate() {
        let mut sums = [0.0; 2];
        for (j, zj) in embeddings.iter().enumerate() {
            if i != j {
                sums[labels[j]] += dist(zi, zj);
            }
        }
        let own = labels[i];
        let a = sums[own] / (count[own] - 1) as f64;
        let b = sums[1 - own] / count[1 - own] as f64;
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / embeddings.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn separated_clusters() {
        let mut rng = SplitMix64::new(1);
        let mut e = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let c = if i % 2 == 0 { -10.0 } else { 10.0 };
            e.push(vec![c + 0.1 * rng.normal(), 0.1 * rng.normal()]);
            y.push(i % 2);
        }
        assert!(silhouette(&e, &y).unwrap() > 0.9);
    }

    #[test]
    fn interleaved_clusters_near_zero() {
        let mut rng = SplitMix64::new(2);
        let e: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let y: Vec<usize> = (0..400).map(|i| i % 2).collect();
        assert!(silhouette(&e, &y).unwrap().abs() <= 0.1);
    }

    #[test]
    fn hand_case() {
        // Class 0 at 0 and 1, class 1 at 5 and 6 (one dimension).
        let e = vec![vec![0.0], vec![1.0], vec![5.0], vec![6.0]];
        let y = [0, 0, 1, 1];
        // a = 1 everywhere; b = 5.5, 4.5, 4.5, 5.5
        let expect = ((5.5 - 1.0) / 5.5 + (4.5 - 1.0) / 4.5) / 2.0;
        assert!((silhouette(&e, &y).unwrap() - expect).abs() <= 1e-12);
    }

    #[test]
    fn rejects_singletons() {
        let e = vec![vec![0.0], vec![1.0], vec![5.0]];
        assert!(silhouette(&e, &[0, 0, 1]).is_err());
    }
}
