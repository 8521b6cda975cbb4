//! Binary cross entropy over the 1-N score row.

use crate::error::{Error, Result};
use crate::numerics::ops::sigmoid;

/// Mean BCE between `sigmoid(logits)` and `target`, plus its gradient
/// `(ρ − y)/|E|` with respect to the logits.
///
/// Uses `log ρ = −softplus(−x)` and `log(1 − ρ) = −softplus(x)`.
pub fn bce_loss(logits: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != target.len() {
        return Err(Error::Dimension(format!(
            "bce: {} logits vs {} targets",
            logits.len(),
            target.len()
        )));
    }
    if logits.is_empty() {
        return Err(Error::Dimension("bce: empty score row".into()));
    }
    if let Some(x) = logits.iter().find(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("bce: non-finite logit {x}")));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&x, &y) in logits.iter().zip(target) {
        // y·softplus(−x) + (1 − y)·softplus(x) = softplus(x) − y·x
        loss += softplus(x) - y * x;
        grad.push((sigmoid(x) - y) / n);
    }
    Ok((loss / n, grad))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{finite_diff_grad, relative_error};

    #[test]
    fn symmetric_point_is_ln2_with_zero_grad() {
        let (l, g) = bce_loss(&[0.0; 6], &[0.5; 6]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = vec![0.3, -1.2, 2.5, 0.0, -0.4];
        let y = vec![0.91, 0.02, 0.02, 0.5, 0.02];
        let (_, g) = bce_loss(&x, &y).unwrap();
        let num = finite_diff_grad(
            |p| bce_loss(&p[0], &y).unwrap().0,
            std::slice::from_ref(&x),
            1e-5,
        )
        .unwrap();
        assert!(relative_error(&g, &num[0]) <= 1e-8);
    }

    #[test]
    fn smoothed_one_hot_by_hand() {
        // ε = 0.1, |E| = 10, positive at index 2
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.5 - 2.0).collect();
        let y: Vec<f64> = (0..10).map(|i| if i == 2 { 0.91 } else { 0.01 }).collect();
        let mut hand = 0.0;
        for i in 0..10 {
            let rho = 1.0 / (1.0 + (-x[i]).exp());
            hand -= y[i] * rho.ln() + (1.0 - y[i]) * (1.0 - rho).ln();
        }
        hand /= 10.0;
        let (l, _) = bce_loss(&x, &y).unwrap();
        assert!((l - hand).abs() < 1e-14, "{l} vs {hand}");
    }

    #[test]
    fn large_logits_stay_finite() {
        let (l, g) = bce_loss(&[800.0, -800.0], &[1.0, 0.0]).unwrap();
        assert!(l.abs() < 1e-300);
        assert!(g.iter().all(|v| v.is_finite()));
        let (l, _) = bce_loss(&[800.0], &[0.0]).unwrap();
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            bce_loss(&[f64::NAN], &[0.0]),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            bce_loss(&[0.0], &[0.0, 1.0]),
            Err(Error::Dimension(_))
        ));
    }
}
