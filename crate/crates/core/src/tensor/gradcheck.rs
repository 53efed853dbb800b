// SPDX-License-Identifier: Apache-2.0

use super::Param;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// (param index, flat coordinate) of the worst coordinate.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// `|a − n| / max(1e−8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the analytic gradients stored in `params[*].grad` against
/// central differences of `loss` with step `eps`, coordinate by coordinate.
/// Values are restored afterwards.
pub fn gradient_check<F>(params: &mut [Param], eps: f64, mut loss: F) -> GradCheck
where
    F: FnMut(&[Param]) -> f64,
{
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    for pi in 0..params.len() {
        for k in 0..params[pi].value.len() {
            let orig = params[pi].value.data()[k];
            params[pi].value.data_mut()[k] = orig + eps;
            let up = loss(params);
            params[pi].value.data_mut()[k] = orig - eps;
            let down = loss(params);
            params[pi].value.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(params[pi].grad.data()[k], numeric);
            out.coordinates += 1;
            if err > out.max_rel_error {
                out.max_rel_error = err;
                out.worst = (pi, k);
            }
        }
    }
    out
}
