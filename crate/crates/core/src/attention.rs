//! Priori-biased attention over the kernels sliced from a relation embedding.
//!
//! For a head embedding `e_h` and kernels `κ_1..κ_m` (flattened `r_w·r_h`):
//!
//! ```text
//! q        = A_Q · e_h                          (k)
//! key_i    = A_K · κ_i                          (k)
//! value_i  = a_V · κ_i                          (scalar)
//! logit_i  = q·key_i / √k + λ · p(h,r) · (u_i − u_ref)
//! s        = softmax(logits)                    (over active kernels)
//! α_i      = s_i · value_i
//! ```
//!
//! `u` is a learned per-kernel vector and `u_ref` its entry at the first
//! active kernel. A bias shared by all kernels cancels in the softmax, so
//! only differences in `u` let the priori value move the weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ops::{masked_softmax, softmax_backward};
use crate::numerics::tensor::{add_outer, dot, mat_vec, vec_mat, Tensor2};

/// Learned attention arrays plus the priori weight λ (a hyperparameter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// `A_Q`, `k × d_e`.
    pub query_proj: Tensor2,
    /// `A_K`, `k × (r_w·r_h)`.
    pub key_proj: Tensor2,
    /// `a_V`, `1 × (r_w·r_h)`.
    pub value_proj: Tensor2,
    /// `u`, `1 × m`.
    pub priori_mod: Tensor2,
    pub lambda: f64,
}

impl AttentionParams {
    pub fn width(&self) -> usize {
        self.query_proj.rows()
    }

    pub fn n_kernels(&self) -> usize {
        self.priori_mod.cols()
    }

    fn check(&self, d_e: usize, kernel_len: usize, m: usize) -> Result<()> {
        let k = self.width();
        let ok = k > 0
            && self.query_proj.shape() == (k, d_e)
            && self.key_proj.shape() == (k, kernel_len)
            && self.value_proj.shape() == (1, kernel_len)
            && self.priori_mod.shape() == (1, m);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "attention parameters do not fit d_e={d_e}, kernel={kernel_len}, m={m}"
            )))
        }
    }
}

/// The `m` kernels cut from a relation embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    pub kernels: Vec<Tensor2>,
    pub side: usize,
    pub r_w: usize,
    pub r_h: usize,
}

/// Integer square root of `m` if `m` is a positive perfect square.
pub fn perfect_square_root(m: usize) -> Option<usize> {
    if m == 0 {
        return None;
    }
    let r = (m as f64).sqrt().round() as usize;
    (r * r == m).then_some(r)
}

/// Reshapes `e_r` row-major into an `(r_w√m) × (r_h√m)` plane and cuts it
/// into `√m × √m` blocks of `r_w × r_h`, numbered row-major by block.
pub fn kernel_slices(e_r: &[f64], m: usize, r_w: usize, r_h: usize) -> Result<KernelBank> {
    let side = perfect_square_root(m).ok_or_else(|| {
        Error::Config(format!(
            "kernel count m={m} must be the square of a positive integer"
        ))
    })?;
    if e_r.len() != m * r_w * r_h || r_w == 0 || r_h == 0 {
        return Err(Error::Config(format!(
            "relation dimension {} != m·r_w·r_h = {m}·{r_w}·{r_h}",
            e_r.len()
        )));
    }
    let plane_cols = r_h * side;
    let kernels = (0..m)
        .map(|i| {
            let (bi, bj) = (i / side, i % side);
            let mut k = Tensor2::zeros(r_w, r_h);
            for a in 0..r_w {
                let start = (bi * r_w + a) * plane_cols + bj * r_h;
                k.row_mut(a).copy_from_slice(&e_r[start..start + r_h]);
            }
            k
        })
        .collect();
    Ok(KernelBank {
        kernels,
        side,
        r_w,
        r_h,
    })
}

impl KernelBank {
    pub fn m(&self) -> usize {
        self.kernels.len()
    }

    /// Inverse of [`kernel_slices`]: scatters per-kernel arrays back into
    /// relation-embedding layout.
    pub fn assemble(&self, per_kernel: &[Tensor2]) -> Vec<f64> {
        let plane_cols = self.r_h * self.side;
        let mut out = vec![0.0; self.side * self.side * self.r_w * self.r_h];
        for (i, k) in per_kernel.iter().enumerate() {
            let (bi, bj) = (i / self.side, i % self.side);
            for a in 0..self.r_w {
                let start = (bi * self.r_w + a) * plane_cols + bj * self.r_h;
                out[start..start + self.r_h].copy_from_slice(k.row(a));
            }
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.assemble(&self.kernels)
    }
}

/// Which parts of the attention are live. The default is the full model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionSwitches {
    /// Include the `λ·p·u_i` logit bias.
    pub priori: bool,
    /// Use the learned softmax and values; when off, `α_i = 1/|active|`.
    pub attention: bool,
    /// Kernels taking part in the softmax and the convolution.
    pub active: Vec<bool>,
}

impl AttentionSwitches {
    pub fn full(m: usize) -> Self {
        Self {
            priori: true,
            attention: true,
            active: vec![true; m],
        }
    }

    fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// First active kernel; its `u` entry is the zero point of the bias.
    fn reference(&self) -> usize {
        self.active.iter().position(|&a| a).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub head: Vec<f64>,
    pub kernels: Vec<Vec<f64>>,
    pub priori: f64,
    pub query: Vec<f64>,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub alpha: Vec<f64>,
    pub switches: AttentionSwitches,
    pub bank_layout: (usize, usize, usize),
}

pub fn attention_weights(
    e_h: &[f64],
    bank: &KernelBank,
    p_hr: f64,
    params: &AttentionParams,
    switches: &AttentionSwitches,
) -> Result<AttentionTrace> {
    let m = bank.m();
    let kernel_len = bank.r_w * bank.r_h;
    params.check(e_h.len(), kernel_len, m)?;
    if switches.active.len() != m || switches.n_active() == 0 {
        return Err(Error::Config(
            "active-kernel mask must select at least one of m kernels".into(),
        ));
    }
    if !(p_hr >= 0.0) {
        return Err(Error::Numeric(format!("priori value {p_hr} must be >= 0")));
    }
    let scale = 1.0 / (params.width() as f64).sqrt();
    let kernels: Vec<Vec<f64>> = bank.kernels.iter().map(|k| k.data().to_vec()).collect();
    let query = mat_vec(&params.query_proj, e_h);
    let keys: Vec<Vec<f64>> = kernels
        .iter()
        .map(|k| mat_vec(&params.key_proj, k))
        .collect();
    let values: Vec<f64> = kernels
        .iter()
        .map(|k| dot(params.value_proj.data(), k))
        .collect();
    let bias = if switches.priori {
        params.lambda * p_hr
    } else {
        0.0
    };
    // u is measured from the first active kernel's entry: softmax ignores the
    // shift, and a constant u then contributes exactly zero
    let u_ref = params.priori_mod.data()[switches.reference()];
    let logits: Vec<f64> = keys
        .iter()
        .zip(params.priori_mod.data())
        .map(|(key, u)| dot(&query, key) * scale + bias * (u - u_ref))
        .collect();
    if query
        .iter()
        .chain(&values)
        .chain(&logits)
        .any(|v| !v.is_finite())
    {
        return Err(Error::Numeric("non-finite attention projection".into()));
    }
    let (probs, alpha) = if switches.attention {
        let probs = masked_softmax(&logits, &switches.active)?;
        let alpha = probs.iter().zip(&values).map(|(s, v)| s * v).collect();
        (probs, alpha)
    } else {
        let w = 1.0 / switches.n_active() as f64;
        let probs: Vec<f64> = switches
            .active
            .iter()
            .map(|&a| if a { w } else { 0.0 })
            .collect();
        (probs.clone(), probs)
    };
    Ok(AttentionTrace {
        head: e_h.to_vec(),
        kernels,
        priori: p_hr,
        query,
        keys,
        values,
        logits,
        probs,
        alpha,
        switches: switches.clone(),
        bank_layout: (bank.side, bank.r_w, bank.r_h),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub head: Vec<f64>,
    /// Gradient with respect to the relation embedding the bank came from.
    pub relation: Vec<f64>,
    pub query_proj: Tensor2,
    pub key_proj: Tensor2,
    pub value_proj: Tensor2,
    pub priori_mod: Tensor2,
}

/// Reverse-mode gradients of `α` with respect to `e_h`, `e_r` (through keys
/// and values) and every attention array.
pub fn attention_weights_backward(
    trace: &AttentionTrace,
    params: &AttentionParams,
    grad_alpha: &[f64],
) -> Result<AttentionGrads> {
    let m = trace.alpha.len();
    let kernel_len = trace.kernels.first().map_or(0, Vec::len);
    params
        .check(trace.head.len(), kernel_len, m)
        .map_err(|e| Error::State(format!("trace does not match parameters: {e}")))?;
    if trace.query.len() != params.width() {
        return Err(Error::State(format!(
            "trace was recorded with width {}, parameters have {}",
            trace.query.len(),
            params.width()
        )));
    }
    if grad_alpha.len() != m {
        return Err(Error::Dimension(format!(
            "grad_alpha has {} entries, expected {m}",
            grad_alpha.len()
        )));
    }
    let k = params.width();
    let mut grads = AttentionGrads {
        head: vec![0.0; trace.head.len()],
        relation: vec![0.0; m * kernel_len],
        query_proj: Tensor2::zeros(k, trace.head.len()),
        key_proj: Tensor2::zeros(k, kernel_len),
        value_proj: Tensor2::zeros(1, kernel_len),
        priori_mod: Tensor2::zeros(1, m),
    };
    if !trace.switches.attention {
        // α is a constant of the mask
        return Ok(grads);
    }
    let (side, r_w, r_h) = trace.bank_layout;
    let mut kernel_grads = vec![Tensor2::zeros(r_w, r_h); m];

    let grad_probs: Vec<f64> = grad_alpha
        .iter()
        .zip(&trace.values)
        .map(|(g, v)| g * v)
        .collect();
    let grad_values: Vec<f64> = grad_alpha
        .iter()
        .zip(&trace.probs)
        .map(|(g, s)| g * s)
        .collect();
    let grad_logits = softmax_backward(&trace.probs, &grad_probs);

    let scale = 1.0 / (k as f64).sqrt();
    let bias = if trace.switches.priori {
        params.lambda * trace.priori
    } else {
        0.0
    };
    let mut grad_query = vec![0.0; k];
    for i in 0..m {
        // value path
        let kg = kernel_grads[i].data_mut();
        for (j, (&kv, &av)) in trace.kernels[i]
            .iter()
            .zip(params.value_proj.data())
            .enumerate()
        {
            grads.value_proj.data_mut()[j] += grad_values[i] * kv;
            kg[j] += grad_values[i] * av;
        }
        // logit path
        let gl = grad_logits[i];
        if gl == 0.0 {
            continue;
        }
        grads.priori_mod.data_mut()[i] += gl * bias;
        for (gq, key) in grad_query.iter_mut().zip(&trace.keys[i]) {
            *gq += gl * scale * key;
        }
        let grad_key: Vec<f64> = trace.query.iter().map(|q| gl * scale * q).collect();
        add_outer(&mut grads.key_proj, 1.0, &grad_key, &trace.kernels[i]);
        for (kgj, g) in kg.iter_mut().zip(vec_mat(&grad_key, &params.key_proj)) {
            *kgj += g;
        }
    }
    let total: f64 = grad_logits.iter().sum();
    grads.priori_mod.data_mut()[trace.switches.reference()] -= total * bias;
    add_outer(&mut grads.query_proj, 1.0, &grad_query, &trace.head);
    grads.head = vec_mat(&grad_query, &params.query_proj);
    let layout = KernelBank {
        kernels: Vec::new(),
        side,
        r_w,
        r_h,
    };
    grads.relation = layout.assemble(&kernel_grads);
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{finite_diff_grad, relative_error};
    use crate::numerics::rng::RngStream;

    fn random(rng: &mut RngStream, rows: usize, cols: usize) -> Tensor2 {
        Tensor2::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.uniform_in(-1.0, 1.0))
                .collect(),
        )
        .unwrap()
    }

    fn random_params(
        rng: &mut RngStream,
        k: usize,
        d_e: usize,
        klen: usize,
        m: usize,
    ) -> AttentionParams {
        AttentionParams {
            query_proj: random(rng, k, d_e),
            key_proj: random(rng, k, klen),
            value_proj: random(rng, 1, klen),
            priori_mod: random(rng, 1, m),
            lambda: 0.3,
        }
    }

    #[test]
    fn single_kernel_equals_reshape() {
        let e: Vec<f64> = (0..6).map(f64::from).collect();
        let b = kernel_slices(&e, 1, 2, 3).unwrap();
        assert_eq!(b.kernels[0].data(), &e[..]);
    }

    #[test]
    fn block_slicing_index_arithmetic() {
        let e: Vec<f64> = (0..16).map(f64::from).collect();
        let b = kernel_slices(&e, 4, 2, 2).unwrap();
        assert_eq!(b.kernels[0].data(), &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(b.kernels[1].data(), &[2.0, 3.0, 6.0, 7.0]);
        assert_eq!(b.kernels[3].data(), &[10.0, 11.0, 14.0, 15.0]);
    }

    #[test]
    fn slicing_rejects_bad_shapes() {
        assert!(matches!(
            kernel_slices(&[0.0; 12], 3, 2, 2),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            kernel_slices(&[0.0; 15], 4, 2, 2),
            Err(Error::Config(_))
        ));
        assert!(matches!(kernel_slices(&[], 0, 2, 2), Err(Error::Config(_))));
    }

    #[test]
    fn slicing_partitions_the_embedding() {
        let mut rng = RngStream::new(3, "test");
        for (m, rw, rh) in [(1, 3, 2), (4, 2, 3), (9, 3, 3), (16, 1, 2)] {
            let e: Vec<f64> = (0..m * rw * rh).map(|_| rng.uniform()).collect();
            let b = kernel_slices(&e, m, rw, rh).unwrap();
            assert_eq!(b.flatten(), e);
        }
    }

    #[test]
    fn identical_kernels_without_priori_give_uniform_weights() {
        let mut rng = RngStream::new(5, "test");
        let mut p = random_params(&mut rng, 3, 6, 4, 4);
        p.lambda = 0.0;
        let kernel: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
        let e_r = kernel_slices(&kernel.repeat(4), 4, 1, 4).unwrap();
        let e_h: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let tr = attention_weights(&e_h, &e_r, 1.5, &p, &AttentionSwitches::full(4)).unwrap();
        for i in 1..4 {
            assert!((tr.probs[i] - 0.25).abs() < 1e-15);
            assert!((tr.alpha[i] - tr.alpha[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_modulation_makes_priori_a_no_op() {
        let mut rng = RngStream::new(6, "test");
        let mut p = random_params(&mut rng, 2, 5, 4, 4);
        p.priori_mod.fill(0.7);
        let e_r: Vec<f64> = (0..16).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let bank = kernel_slices(&e_r, 4, 2, 2).unwrap();
        let e_h: Vec<f64> = (0..5).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let sw = AttentionSwitches::full(4);
        let base = attention_weights(&e_h, &bank, 0.0, &p, &sw).unwrap().alpha;
        for (lambda, prior) in [(0.1, 1.0), (0.4, 3.0), (2.0, 0.5)] {
            p.lambda = lambda;
            let a = attention_weights(&e_h, &bank, prior, &p, &sw)
                .unwrap()
                .alpha;
            for (x, y) in a.iter().zip(&base) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    /// Scalar-by-scalar transcription of the attention equations.
    fn attention_oracle(e_h: &[f64], e_r: &[f64], p: &AttentionParams, prior: f64) -> Vec<f64> {
        let k = p.query_proj.rows();
        let q: Vec<f64> = (0..k)
            .map(|a| {
                (0..e_h.len())
                    .map(|j| p.query_proj.get(a, j) * e_h[j])
                    .sum()
            })
            .collect();
        // m = 4, kernels 2x2 from a 4x4 plane
        let kern = |i: usize| -> Vec<f64> {
            let (bi, bj) = (i / 2, i % 2);
            vec![
                e_r[(2 * bi) * 4 + 2 * bj],
                e_r[(2 * bi) * 4 + 2 * bj + 1],
                e_r[(2 * bi + 1) * 4 + 2 * bj],
                e_r[(2 * bi + 1) * 4 + 2 * bj + 1],
            ]
        };
        let mut logits = [0.0; 4];
        let mut values = [0.0; 4];
        for i in 0..4 {
            let kv = kern(i);
            let mut s = 0.0;
            for (a, qa) in q.iter().enumerate().take(k) {
                let key_a: f64 = (0..4).map(|j| p.key_proj.get(a, j) * kv[j]).sum();
                s += qa * key_a;
            }
            logits[i] = s / (k as f64).sqrt() + p.lambda * prior * p.priori_mod.get(0, i);
            values[i] = (0..4).map(|j| p.value_proj.get(0, j) * kv[j]).sum();
        }
        let mx = logits.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
        (0..4)
            .map(|i| (logits[i] - mx).exp() / z * values[i])
            .collect()
    }

    #[test]
    fn tiny_config_matches_scalar_oracle() {
        let p = AttentionParams {
            query_proj: Tensor2::from_rows(&[
                vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1],
                vec![0.2, 0.1, -0.4, 0.3, 0.0, 0.2],
            ])
            .unwrap(),
            key_proj: Tensor2::from_rows(&[vec![0.5, -0.5, 0.25, 0.1], vec![-0.3, 0.2, 0.1, 0.4]])
                .unwrap(),
            value_proj: Tensor2::row_vector(vec![1.0, 0.5, -0.5, 0.25]),
            priori_mod: Tensor2::row_vector(vec![-0.1, 0.0, 0.05, 0.1]),
            lambda: 0.1,
        };
        let e_h = [0.3, -0.7, 0.2, 0.9, -0.1, 0.4];
        let e_r: Vec<f64> = (0..16).map(|i| (i as f64 - 7.5) / 8.0).collect();
        let bank = kernel_slices(&e_r, 4, 2, 2).unwrap();
        let tr = attention_weights(&e_h, &bank, 2.0, &p, &AttentionSwitches::full(4)).unwrap();
        let oracle = attention_oracle(&e_h, &e_r, &p, 2.0);
        for (a, b) in tr.alpha.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert!((tr.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = RngStream::new(8, "test");
        let p = random_params(&mut rng, 2, 6, 4, 4);
        let e_r: Vec<f64> = (0..16).map(|_| rng.uniform()).collect();
        let bank = kernel_slices(&e_r, 4, 2, 2).unwrap();
        let tr = attention_weights(&[0.5; 6], &bank, 1.0, &p, &AttentionSwitches::full(4)).unwrap();
        let g = attention_weights_backward(&tr, &p, &[0.0; 4]).unwrap();
        assert!(g.head.iter().chain(&g.relation).all(|&v| v == 0.0));
        assert_eq!(g.key_proj.max_abs(), 0.0);
        assert_eq!(g.query_proj.max_abs(), 0.0);
    }

    #[test]
    fn single_kernel_value_gradient_is_the_kernel() {
        let mut rng = RngStream::new(9, "test");
        let p = random_params(&mut rng, 2, 6, 4, 1);
        let e_r: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
        let bank = kernel_slices(&e_r, 1, 2, 2).unwrap();
        let tr = attention_weights(&[0.1; 6], &bank, 1.0, &p, &AttentionSwitches::full(1)).unwrap();
        assert_eq!(tr.probs, vec![1.0]);
        let g = attention_weights_backward(&tr, &p, &[2.5]).unwrap();
        for (gv, k) in g.value_proj.data().iter().zip(&e_r) {
            assert!((gv - 2.5 * k).abs() < 1e-15);
        }
        assert_eq!(g.query_proj.max_abs(), 0.0);
    }

    #[test]
    fn mismatched_trace_is_a_state_error() {
        let mut rng = RngStream::new(10, "test");
        let p = random_params(&mut rng, 2, 6, 4, 4);
        let bank = kernel_slices(&[0.2; 16], 4, 2, 2).unwrap();
        let tr = attention_weights(&[0.1; 6], &bank, 1.0, &p, &AttentionSwitches::full(4)).unwrap();
        let other = random_params(&mut rng, 3, 6, 4, 4);
        let r = attention_weights_backward(&tr, &other, &[1.0; 4]);
        assert!(matches!(r, Err(Error::State(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RngStream::new(12, "test");
        for trial in 0..10 {
            let p = random_params(&mut rng, 2, 6, 4, 4);
            let e_h: Vec<f64> = (0..6).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let e_r: Vec<f64> = (0..16).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let w: Vec<f64> = (0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let prior = 2.0;
            let sw = AttentionSwitches::full(4);
            let unpack = |b: &[Vec<f64>]| -> (Vec<f64>, Vec<f64>, AttentionParams) {
                let mut q = p.clone();
                q.query_proj = Tensor2::from_vec(2, 6, b[2].clone()).unwrap();
                q.key_proj = Tensor2::from_vec(2, 4, b[3].clone()).unwrap();
                q.value_proj = Tensor2::from_vec(1, 4, b[4].clone()).unwrap();
                q.priori_mod = Tensor2::from_vec(1, 4, b[5].clone()).unwrap();
                (b[0].clone(), b[1].clone(), q)
            };
            let loss = |b: &[Vec<f64>]| -> f64 {
                let (h, r, q) = unpack(b);
                let bank = kernel_slices(&r, 4, 2, 2).unwrap();
                let tr = attention_weights(&h, &bank, prior, &q, &sw).unwrap();
                dot(&tr.alpha, &w)
            };
            let blocks = vec![
                e_h.clone(),
                e_r.clone(),
                p.query_proj.data().to_vec(),
                p.key_proj.data().to_vec(),
                p.value_proj.data().to_vec(),
                p.priori_mod.data().to_vec(),
            ];
            let numeric = finite_diff_grad(loss, &blocks, 1e-5).unwrap();
            let bank = kernel_slices(&e_r, 4, 2, 2).unwrap();
            let tr = attention_weights(&e_h, &bank, prior, &p, &sw).unwrap();
            let g = attention_weights_backward(&tr, &p, &w).unwrap();
            let analytic = [
                g.head.clone(),
                g.relation.clone(),
                g.query_proj.data().to_vec(),
                g.key_proj.data().to_vec(),
                g.value_proj.data().to_vec(),
                g.priori_mod.data().to_vec(),
            ];
            for (b, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let err = relative_error(a, n);
                assert!(err <= 1e-4, "trial {trial} block {b}: {err}");
            }
            // both the query path and the key/value paths carry gradient
            assert!(g.head.iter().any(|&v| v != 0.0));
            assert!(g.relation.iter().any(|&v| v != 0.0));
        }
    }
}
