//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Moment estimates for a list of parameter blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed moments congruent with blocks of the given lengths.
    pub fn new(block_lens: &[usize]) -> Self {
        Self {
            first_moment: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: block_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// One Adam update over every block; `params[b]` and `grads[b]` must match
/// the shape the state was created with.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Dimension(format!(
            "adam: {} parameter blocks, {} gradient blocks, {} moment blocks",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (b, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[b].len() {
            return Err(Error::Dimension(format!("adam: block {b} shape mismatch")));
        }
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[b];
        let v = &mut state.second_moment[b];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut w = vec![0.3, -1.0, 2.0];
        let before = w.clone();
        let mut st = AdamState::new(&[3]);
        for _ in 0..5 {
            adam_step(&mut [&mut w], &[&[0.0; 3]], &mut st, 0.1).unwrap();
        }
        assert_eq!(w, before);
        assert_eq!(st.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        let mut w = vec![0.0; 4];
        let g = [3.0, -0.01, 1e3, -7.0];
        let mut st = AdamState::new(&[4]);
        adam_step(&mut [&mut w], &[&g], &mut st, 0.01).unwrap();
        for (wi, gi) in w.iter().zip(g) {
            assert!((wi + 0.01 * gi.signum()).abs() < 1e-7, "{wi}");
        }
    }

    #[test]
    fn three_steps_on_square_match_hand_trace() {
        // f(w) = w², grad 2w, w0 = 1, lr = 0.1
        let mut w = vec![1.0];
        let mut st = AdamState::new(&[1]);
        for _ in 0..3 {
            let g = [2.0 * w[0]];
            adam_step(&mut [&mut w], &[&g], &mut st, 0.1).unwrap();
        }
        // hand-stepped trace with the textbook update
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            let g = 2.0 * x;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((w[0] - x).abs() < 1e-12);
        assert!((w[0] - 0.7).abs() < 1e-2);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut w = vec![0.0; 2];
        let mut st = AdamState::new(&[3]);
        let r = adam_step(&mut [&mut w], &[&[1.0, 1.0]], &mut st, 0.1);
        assert!(matches!(r, Err(Error::Dimension(_))));
        assert_eq!(st.step, 0);
    }
}
