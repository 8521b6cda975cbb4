//! Convolution, softmax, dropout and their reverse-mode counterparts.

use super::rng::RngStream;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Single-channel "valid" cross-correlation with stride 1:
/// `out[i][j] = Σ_{a,b} input[i+a][j+b] · kernel[a][b]`.
pub fn conv2d_valid(input: &Tensor2, kernel: &Tensor2) -> Result<Tensor2> {
    let (dw, dh) = input.shape();
    let (rw, rh) = kernel.shape();
    if rw > dw || rh > dh || rw == 0 || rh == 0 {
        return Err(Error::Dimension(format!(
            "kernel {rw}x{rh} does not fit input {dw}x{dh}"
        )));
    }
    let (ow, oh) = (dw - rw + 1, dh - rh + 1);
    let mut out = Tensor2::zeros(ow, oh);
    for i in 0..ow {
        for j in 0..oh {
            let mut acc = 0.0;
            for a in 0..rw {
                let in_row = &input.row(i + a)[j..j + rh];
                acc += in_row
                    .iter()
                    .zip(kernel.row(a))
                    .map(|(x, k)| x * k)
                    .sum::<f64>();
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_valid`] with respect to its input and kernel.
pub fn conv2d_valid_backward(
    input: &Tensor2,
    kernel: &Tensor2,
    grad_out: &Tensor2,
) -> Result<(Tensor2, Tensor2)> {
    let (dw, dh) = input.shape();
    let (rw, rh) = kernel.shape();
    if grad_out.shape() != (dw + 1 - rw, dh + 1 - rh) {
        return Err(Error::Dimension("conv output gradient shape".into()));
    }
    let mut grad_in = Tensor2::zeros(dw, dh);
    let mut grad_k = Tensor2::zeros(rw, rh);
    for i in 0..grad_out.rows() {
        for j in 0..grad_out.cols() {
            let g = grad_out.get(i, j);
            if g == 0.0 {
                continue;
            }
            for a in 0..rw {
                for b in 0..rh {
                    grad_in.add_at(i + a, j + b, g * kernel.get(a, b));
                    grad_k.add_at(a, b, g * input.get(i + a, j + b));
                }
            }
        }
    }
    Ok((grad_in, grad_k))
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Dimension("softmax of an empty vector".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric("non-finite softmax logits".into()));
    }
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Softmax restricted to `active`; inactive positions get probability 0.
pub fn masked_softmax(logits: &[f64], active: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != active.len() {
        return Err(Error::Dimension("mask length".into()));
    }
    let picked: Vec<f64> = logits
        .iter()
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|(&l, _)| l)
        .collect();
    let probs = softmax(&picked)?;
    let mut it = probs.into_iter();
    Ok(active
        .iter()
        .map(|&a| if a { it.next().unwrap_or(0.0) } else { 0.0 })
        .collect())
}

/// Vector-Jacobian product of softmax: `dl_i = s_i (ds_i − Σ_j s_j ds_j)`.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(grad_probs).map(|(s, g)| s * g).sum();
    probs
        .iter()
        .zip(grad_probs)
        .map(|(s, g)| s * (g - inner))
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, else `1/(1−p)`.
/// With `p == 0` no random numbers are consumed.
pub fn dropout_mask(rng: &mut RngStream, p: f64, n: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if p == 0.0 {
        return Ok(vec![1.0; n]);
    }
    let keep = 1.0 / (1.0 - p);
    Ok((0..n)
        .map(|_| if rng.uniform() < p { 0.0 } else { keep })
        .collect())
}
