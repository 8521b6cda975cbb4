//! The dynamic-convolution scorer and its exact reverse pass.
//!
//! Per query `(h, r)`:
//!
//! 1. `ē_h` = `dropout_in(ent[h])` reshaped to `d_w × d_h`
//! 2. kernels `κ_i` sliced from `rel[r]`
//! 3. `α` from the priori-biased attention on the undropped `ent[h]`
//! 4. map = `conv(ē_h, Σ_i α_i κ_i)`, equal to `Σ_i conv(ē_h, α_i κ_i)`
//! 5. batch norm over the whole batch, ReLU, `dropout_feat`
//! 6. `v = W_fcᵀ·map + b_fc`
//! 7. `z = W_outᵀ·ReLU(dropout_out(v)) + b_out`
//! 8. `logits = ent·z`, one score per entity
//!
//! The sigmoid is applied by the loss. Batch norm couples the queries of a
//! batch, so the forward and backward passes work on whole batches.

use crate::attention::{
    attention_weights, attention_weights_backward, kernel_slices, AttentionSwitches,
    AttentionTrace, KernelBank,
};
use crate::error::{Error, Result};
use crate::kgdata::priori::PrioriTable;
use crate::numerics::batchnorm::{
    batchnorm_apply, batchnorm_backward, BatchNormCache, BatchNormState, NormMode,
};
use crate::numerics::ops::{conv2d_valid, conv2d_valid_backward, dropout_mask, sigmoid};
use crate::numerics::rng::TrainStreams;
use crate::numerics::tensor::{add_outer, mat_vec, vec_mat, Tensor2};

use super::config::ModelConfig;
use super::params::{ModelGrads, ModelParams};

/// Forward mode. Training draws dropout masks from the given streams and
/// normalizes with batch statistics.
pub enum Mode<'a> {
    Train(&'a mut TrainStreams),
    Eval,
}

/// Indices of the kernels kept by a fraction: the lowest `⌈fraction·m⌉`.
pub fn kernel_fraction_mask(cfg: &ModelConfig, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    // shave rounding noise such as 0.3·10 = 3.0000000000000004
    let n = ((fraction * cfg.m as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok((0..n.min(cfg.m)).collect())
}

fn switches(cfg: &ModelConfig) -> Result<AttentionSwitches> {
    let mut active = vec![false; cfg.m];
    for i in kernel_fraction_mask(cfg, cfg.kernel_fraction)? {
        active[i] = true;
    }
    Ok(AttentionSwitches {
        priori: cfg.use_priori,
        attention: cfg.use_attention,
        active,
    })
}

/// Cached activations of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTrace {
    pub head: usize,
    pub relation: usize,
    pub input_mask: Vec<f64>,
    /// Dropped-out head embedding as a `d_w × d_h` plane.
    pub plane: Tensor2,
    pub bank: KernelBank,
    pub attention: AttentionTrace,
    /// `Σ_i α_i κ_i` over active kernels.
    pub mixed_kernel: Tensor2,
    /// Convolution output before batch norm.
    pub feature_map: Tensor2,
    pub normalized: Vec<f64>,
    pub feat_mask: Vec<f64>,
    /// Post-ReLU, post-dropout features fed to the FC layer.
    pub features: Vec<f64>,
    /// FC output `v`.
    pub hidden_pre: Vec<f64>,
    pub out_mask: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Output projection `z` (after the sigmoid when `sigmoid_pre_dot`).
    pub projection: Vec<f64>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub queries: Vec<QueryTrace>,
    pub norm: BatchNormCache,
    /// Batch-norm state after this forward (running stats updated in train).
    pub bn_next: BatchNormState,
    pub train: bool,
    pub sigmoid_pre_dot: bool,
}

impl ForwardTrace {
    pub fn logits(&self) -> Vec<&[f64]> {
        self.queries.iter().map(|q| q.logits.as_slice()).collect()
    }
}

struct Staged {
    head: usize,
    relation: usize,
    input_mask: Vec<f64>,
    plane: Tensor2,
    bank: KernelBank,
    attention: AttentionTrace,
    mixed_kernel: Tensor2,
    feature_map: Tensor2,
}

/// Scores a batch of `(head, relation)` queries against every entity.
pub fn forward_batch(
    queries: &[(usize, usize)],
    params: &ModelParams,
    priori: &PrioriTable,
    cfg: &ModelConfig,
    mut mode: Mode<'_>,
) -> Result<ForwardTrace> {
    params.check(cfg)?;
    let train = matches!(mode, Mode::Train(_));
    if train && cfg.sigmoid_pre_dot {
        return Err(Error::Config("sigmoid_pre_dot is evaluation-only".into()));
    }
    if queries.is_empty() {
        return Err(Error::Dimension("empty batch".into()));
    }
    let sw = switches(cfg)?;
    let d_e = cfg.d_e();
    let n_e = params.n_entities();

    let mut staged = Vec::with_capacity(queries.len());
    for &(h, r) in queries {
        if h >= n_e {
            return Err(Error::Index { index: h, len: n_e });
        }
        if r >= params.n_relations() {
            return Err(Error::Index {
                index: r,
                len: params.n_relations(),
            });
        }
        let e_h = params.ent.row(h);
        let input_mask = match &mut mode {
            Mode::Train(s) => dropout_mask(&mut s.dropout_in, cfg.dropout_in, d_e)?,
            Mode::Eval => vec![1.0; d_e],
        };
        let dropped: Vec<f64> = e_h.iter().zip(&input_mask).map(|(x, m)| x * m).collect();
        let plane = Tensor2::from_vec(cfg.d_w, cfg.d_h, dropped)?;
        let bank = kernel_slices(params.rel.row(r), cfg.m, cfg.r_w, cfg.r_h)?;
        let p_hr = priori.value(h, r);
        let attention = attention_weights(e_h, &bank, p_hr, &params.attn, &sw)?;
        let mut mixed_kernel = Tensor2::zeros(cfg.r_w, cfg.r_h);
        for (i, k) in bank.kernels.iter().enumerate() {
            if sw.active[i] {
                mixed_kernel.axpy(attention.alpha[i], k)?;
            }
        }
        let feature_map = conv2d_valid(&plane, &mixed_kernel)?;
        staged.push(Staged {
            head: h,
            relation: r,
            input_mask,
            plane,
            bank,
            attention,
            mixed_kernel,
            feature_map,
        });
    }

    let conv_map = cfg.conv_map();
    let flat: Vec<f64> = staged
        .iter()
        .flat_map(|s| s.feature_map.data().iter().copied())
        .collect();
    let norm_mode = if train {
        NormMode::Train
    } else {
        NormMode::Eval
    };
    let (normed, norm, bn_next) = batchnorm_apply(&flat, &params.bn, norm_mode)?;

    let mut out = Vec::with_capacity(staged.len());
    for (qi, s) in staged.into_iter().enumerate() {
        let normalized = normed[qi * conv_map..(qi + 1) * conv_map].to_vec();
        let feat_mask = match &mut mode {
            Mode::Train(st) => dropout_mask(&mut st.dropout_feat, cfg.dropout_feat, conv_map)?,
            Mode::Eval => vec![1.0; conv_map],
        };
        let features: Vec<f64> = normalized
            .iter()
            .zip(&feat_mask)
            .map(|(x, m)| x.max(0.0) * m)
            .collect();
        let mut hidden_pre = vec_mat(&features, &params.fc_w);
        for (v, b) in hidden_pre.iter_mut().zip(params.fc_b.data()) {
            *v += b;
        }
        let out_mask = match &mut mode {
            Mode::Train(st) => dropout_mask(&mut st.dropout_out, cfg.dropout_out, d_e)?,
            Mode::Eval => vec![1.0; d_e],
        };
        let hidden: Vec<f64> = hidden_pre
            .iter()
            .zip(&out_mask)
            .map(|(v, m)| v.max(0.0) * m)
            .collect();
        let mut projection = vec_mat(&hidden, &params.out_w);
        for (z, b) in projection.iter_mut().zip(params.out_b.data()) {
            *z += b;
            if cfg.sigmoid_pre_dot {
                *z = sigmoid(*z);
            }
        }
        let logits = mat_vec(&params.ent, &projection);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite logits".into()));
        }
        out.push(QueryTrace {
            head: s.head,
            relation: s.relation,
            input_mask: s.input_mask,
            plane: s.plane,
            bank: s.bank,
            attention: s.attention,
            mixed_kernel: s.mixed_kernel,
            feature_map: s.feature_map,
            normalized,
            feat_mask,
            features,
            hidden_pre,
            out_mask,
            hidden,
            projection,
            logits,
        });
    }
    Ok(ForwardTrace {
        queries: out,
        norm,
        bn_next,
        train,
        sigmoid_pre_dot: cfg.sigmoid_pre_dot,
    })
}

/// Scores one query; in train mode the batch-norm statistics come from its
/// own feature map.
pub fn forward_score(
    head: usize,
    relation: usize,
    params: &ModelParams,
    priori: &PrioriTable,
    cfg: &ModelConfig,
    mode: Mode<'_>,
) -> Result<(Vec<f64>, ForwardTrace)> {
    let trace = forward_batch(&[(head, relation)], params, priori, cfg, mode)?;
    Ok((trace.queries[0].logits.clone(), trace))
}

/// Exact gradients of `Σ_q grad_logits[q] · logits[q]` with respect to every
/// learned array.
pub fn backward(
    trace: &ForwardTrace,
    grad_logits: &[Vec<f64>],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ModelGrads> {
    params.check(cfg)?;
    if grad_logits.len() != trace.queries.len() {
        return Err(Error::State(format!(
            "{} logit gradients for a trace of {} queries",
            grad_logits.len(),
            trace.queries.len()
        )));
    }
    let n_e = params.n_entities();
    let conv_map = cfg.conv_map();
    let mut g = ModelGrads::zeros_like(params);

    let mut grad_normed = Vec::with_capacity(trace.queries.len() * conv_map);
    for (q, gl) in trace.queries.iter().zip(grad_logits) {
        if gl.len() != n_e || q.logits.len() != n_e || q.normalized.len() != conv_map {
            return Err(Error::State("trace does not match the parameters".into()));
        }
        // logits = ent · z
        add_outer(&mut g.ent, 1.0, gl, &q.projection);
        let mut grad_z = vec_mat(gl, &params.ent);
        if trace.sigmoid_pre_dot {
            for (dz, s) in grad_z.iter_mut().zip(&q.projection) {
                *dz *= s * (1.0 - s);
            }
        }
        for (b, dz) in g.out_b.data_mut().iter_mut().zip(&grad_z) {
            *b += dz;
        }
        add_outer(&mut g.out_w, 1.0, &q.hidden, &grad_z);
        let grad_hidden = mat_vec(&params.out_w, &grad_z);
        let grad_v: Vec<f64> = grad_hidden
            .iter()
            .zip(&q.out_mask)
            .zip(&q.hidden_pre)
            .map(|((d, m), v)| if *v > 0.0 { d * m } else { 0.0 })
            .collect();
        for (b, dv) in g.fc_b.data_mut().iter_mut().zip(&grad_v) {
            *b += dv;
        }
        add_outer(&mut g.fc_w, 1.0, &q.features, &grad_v);
        let grad_features = mat_vec(&params.fc_w, &grad_v);
        grad_normed.extend(
            grad_features
                .iter()
                .zip(&q.feat_mask)
                .zip(&q.normalized)
                .map(|((d, m), x)| if *x > 0.0 { d * m } else { 0.0 }),
        );
    }

    let bn = batchnorm_backward(&trace.norm, &grad_normed);
    g.bn_gamma = bn.gamma;
    g.bn_beta = bn.beta;

    for (qi, q) in trace.queries.iter().enumerate() {
        let grad_map = Tensor2::from_vec(
            q.feature_map.rows(),
            q.feature_map.cols(),
            bn.input[qi * conv_map..(qi + 1) * conv_map].to_vec(),
        )?;
        let (grad_plane, grad_kernel) =
            conv2d_valid_backward(&q.plane, &q.mixed_kernel, &grad_map)?;
        for ((ge, gp), m) in g
            .ent
            .row_mut(q.head)
            .iter_mut()
            .zip(grad_plane.data())
            .zip(&q.input_mask)
        {
            *ge += gp * m;
        }

        let active = &q.attention.switches.active;
        let mut grad_alpha = vec![0.0; q.bank.m()];
        let mut conv_kernel_grads = Vec::with_capacity(q.bank.m());
        for (i, k) in q.bank.kernels.iter().enumerate() {
            if active[i] {
                grad_alpha[i] = k
                    .data()
                    .iter()
                    .zip(grad_kernel.data())
                    .map(|(a, b)| a * b)
                    .sum();
                let mut gk = grad_kernel.clone();
                gk.scale(q.attention.alpha[i]);
                conv_kernel_grads.push(gk);
            } else {
                conv_kernel_grads.push(Tensor2::zeros(cfg.r_w, cfg.r_h));
            }
        }
        for (gr, v) in g
            .rel
            .row_mut(q.relation)
            .iter_mut()
            .zip(q.bank.assemble(&conv_kernel_grads))
        {
            *gr += v;
        }

        let ag = attention_weights_backward(&q.attention, &params.attn, &grad_alpha)?;
        for (ge, v) in g.ent.row_mut(q.head).iter_mut().zip(&ag.head) {
            *ge += v;
        }
        for (gr, v) in g.rel.row_mut(q.relation).iter_mut().zip(&ag.relation) {
            *gr += v;
        }
        g.attn_query.axpy(1.0, &ag.query_proj)?;
        g.attn_key.axpy(1.0, &ag.key_proj)?;
        g.attn_value.axpy(1.0, &ag.value_proj)?;
        g.attn_priori_mod.axpy(1.0, &ag.priori_mod)?;
    }
    Ok(g)
}
