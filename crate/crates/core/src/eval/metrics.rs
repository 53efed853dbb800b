// SPDX-License-Identifier: Apache-2.0

use super::EvalError;

/// Binary detection metrics with class 1 (Trojan) as positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// Set when the metric's denominator was zero and it was reported as 0.
    pub recall_undefined: bool,
    pub precision_undefined: bool,
    pub f1_undefined: bool,
}

impl Metrics {
    pub const CSV_HEADER: &'static str = "accuracy,recall,precision,f1,tp,fp,tn,fn";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.accuracy, self.recall, self.precision, self.f1, self.tp, self.fp, self.tn, self.fn_
        )
    }
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

pub fn compute_metrics(predictions: &[usize], labels: &[usize]) -> Result<Metrics, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::Length(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &y) in predictions.iter().zip(labels) {
        if p > 1 || y > 1 {
            return Err(EvalError::Degenerate(format!("non-binary value {}", p.max(y))));
        }
        match (p, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            _ => fn_ += 1,
        }
    }
    let (recall, recall_undefined) = ratio(tp as f64, (tp + fn_) as f64);
    let (precision, precision_undefined) = ratio(tp as f64, (tp + fp) as f64);
    let (f1, f1_undefined) = ratio(2.0 * precision * recall, precision + recall);
    Ok(Metrics {
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        recall,
        precision,
        f1,
        tp,
        fp,
        tn,
        fn_,
        recall_undefined,
        precision_undefined,
        f1_undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        let m = compute_metrics(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((m.accuracy, m.recall, m.precision, m.f1), (1.0, 1.0, 1.0, 1.0));

        // TP=3 FP=1 TN=4 FN=2
        let p = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let y = [1, 1, 1, 0, 0, 0, 0, 0, 1, 1];
        let m = compute_metrics(&p, &y).unwrap();
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (3, 1, 4, 2));
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f1 - 2.0 * 0.45 / 1.35).abs() <= 1e-12);
        assert_eq!(m.accuracy, 0.7);

        let m = compute_metrics(&[0, 0, 0], &[1, 0, 1]).unwrap();
        assert_eq!(m.recall, 0.0);
        assert!(!m.recall_undefined);
        assert_eq!(m.precision, 0.0);
        assert!(m.precision_undefined);
        assert!(m.f1_undefined);

        assert_eq!(compute_metrics(&[0], &[0, 1]), Err(EvalError::Length(1, 2)));
        assert_eq!(compute_metrics(&[], &[]), Err(EvalError::Empty));
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(pairs in prop::collection::vec((0usize..2, 0usize..2), 1..1000)) {
            let p: Vec<usize> = pairs.iter().map(|x| x.0).collect();
            let y: Vec<usize> = pairs.iter().map(|x| x.1).collect();
            let m = compute_metrics(&p, &y).unwrap();
            let mut cm = [[0usize; 2]; 2];
            for (a, b) in p.iter().zip(&y) {
                cm[*b][*a] += 1;
            }
            prop_assert_eq!((m.tp, m.fp, m.tn, m.fn_), (cm[1][1], cm[0][1], cm[0][0], cm[1][0]));
            prop_assert_eq!(m.accuracy, (cm[1][1] + cm[0][0]) as f64 / p.len() as f64);
            if !m.f1_undefined {
                prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() <= 1e-12);
            }
        }
    }
}
