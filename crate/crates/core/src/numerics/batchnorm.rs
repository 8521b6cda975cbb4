//! Single-channel batch normalization with scalar affine parameters.
//!
//! Training mode normalizes every value by the (biased) mean and variance of
//! the whole batch and folds them into the running statistics with momentum
//! 0.1; the running variance uses the unbiased estimate. Eval mode only reads
//! the running statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchNormState {
    pub gamma: f64,
    pub beta: f64,
    pub running_mean: f64,
    pub running_var: f64,
}

impl Default for BatchNormState {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            beta: 0.0,
            running_mean: 0.0,
            running_var: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics only.
    Eval,
}

/// What the backward pass needs from a forward normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormCache {
    pub mode: NormMode,
    pub normalized: Vec<f64>,
    pub inv_std: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads {
    pub input: Vec<f64>,
    pub gamma: f64,
    pub beta: f64,
}

/// Normalizes `x`; returns outputs, the backward cache and the updated state.
pub fn batchnorm_apply(
    x: &[f64],
    state: &BatchNormState,
    mode: NormMode,
) -> Result<(Vec<f64>, BatchNormCache, BatchNormState)> {
    let mut next = *state;
    let (mean, var) = match mode {
        NormMode::Train => {
            let n = x.len();
            if n < 2 {
                return Err(Error::DegenerateBatch(n));
            }
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let unbiased = var * n as f64 / (n - 1) as f64;
            next.running_mean = (1.0 - BN_MOMENTUM) * state.running_mean + BN_MOMENTUM * mean;
            next.running_var = (1.0 - BN_MOMENTUM) * state.running_var + BN_MOMENTUM * unbiased;
            (mean, var)
        }
        NormMode::Eval => (state.running_mean, state.running_var),
    };
    let inv_std = 1.0 / (var + BN_EPS).sqrt();
    let normalized: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let out = normalized
        .iter()
        .map(|n| state.gamma * n + state.beta)
        .collect();
    Ok((
        out,
        BatchNormCache {
            mode,
            normalized,
            inv_std,
            gamma: state.gamma,
        },
        next,
    ))
}

pub fn batchnorm_backward(cache: &BatchNormCache, grad_out: &[f64]) -> BatchNormGrads {
    let n = grad_out.len() as f64;
    let gamma_grad: f64 = grad_out
        .iter()
        .zip(&cache.normalized)
        .map(|(g, x)| g * x)
        .sum();
    let beta_grad: f64 = grad_out.iter().sum();
    let input = match cache.mode {
        NormMode::Eval => grad_out
            .iter()
            .map(|g| g * cache.gamma * cache.inv_std)
            .collect(),
        NormMode::Train => {
            let mean_g = beta_grad / n;
            let mean_gx = gamma_grad / n;
            grad_out
                .iter()
                .zip(&cache.normalized)
                .map(|(g, x)| cache.gamma * cache.inv_std * (g - mean_g - x * mean_gx))
                .collect()
        }
    };
    BatchNormGrads {
        input,
        gamma: gamma_grad,
        beta: beta_grad,
    }
}
