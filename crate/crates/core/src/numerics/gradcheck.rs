//! Central finite differences, the oracle for every analytic backward pass.

use crate::error::{Error, Result};

/// Gradient of `loss` at `params` by central differences with step `h`.
///
/// `params` is a list of flat blocks; the result has the same layout.
/// `loss` must be deterministic.
pub fn finite_diff_grad<F>(mut loss: F, params: &[Vec<f64>], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[Vec<f64>]) -> f64,
{
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for b in 0..params.len() {
        let mut g = vec![0.0; params[b].len()];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = work[b][i];
            work[b][i] = orig + h;
            let plus = loss(&work);
            work[b][i] = orig - h;
            let minus = loss(&work);
            work[b][i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing block {b} index {i}"
                )));
            }
            *gi = (plus - minus) / (2.0 * h);
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Relative error between two gradient blocks:
/// `max_i |a_i − n_i| / max(max_i |a_i|, max_i |n_i|)`.
///
/// Normalizing by the block's largest magnitude keeps entries that are
/// legitimately near zero from dominating through finite-difference noise.
/// Two all-zero blocks have error 0.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    debug_assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
