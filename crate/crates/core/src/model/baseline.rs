//! Plain-convolution reference scorer with external learned filters.
//!
//! The head and relation planes are stacked vertically into a
//! `2·d_w × d_h` input and convolved with `n_filters` static kernels; the
//! resulting maps go through the same batch norm, ReLU, FC and 1-N scoring
//! steps as the dynamic scorer. Stacking requires `d_e = d_r`.

use crate::error::{Error, Result};
use crate::numerics::batchnorm::{batchnorm_apply, BatchNormState, NormMode};
use crate::numerics::ops::{conv2d_valid, dropout_mask};
use crate::numerics::rng::{RngStream, TrainStreams};
use crate::numerics::tensor::{mat_vec, vec_mat, Tensor2};

use super::config::ModelConfig;
use super::forward::Mode;

pub const STREAM_BASELINE_INIT: &str = "init.baseline";

#[derive(Debug, Clone, PartialEq)]
pub struct PlainConvConfig {
    pub d_w: usize,
    pub d_h: usize,
    /// Relation embedding width; must equal `d_w·d_h`.
    pub d_r: usize,
    pub r_w: usize,
    pub r_h: usize,
    pub n_filters: usize,
    pub dropout_in: f64,
    pub dropout_feat: f64,
    pub dropout_out: f64,
    pub seed: u64,
}

impl PlainConvConfig {
    /// Baseline matching a dynamic-model config, with `d_r = m·r_w·r_h`.
    pub fn from_model(cfg: &ModelConfig, n_filters: usize) -> Result<Self> {
        let c = Self {
            d_w: cfg.d_w,
            d_h: cfg.d_h,
            d_r: cfg.d_r(),
            r_w: cfg.r_w,
            r_h: cfg.r_h,
            n_filters,
            dropout_in: cfg.dropout_in,
            dropout_feat: cfg.dropout_feat,
            dropout_out: cfg.dropout_out,
            seed: cfg.seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn d_e(&self) -> usize {
        self.d_w * self.d_h
    }

    /// Shape of one filter's output over the stacked plane.
    pub fn conv_shape(&self) -> (usize, usize) {
        (2 * self.d_w + 1 - self.r_w, self.d_h + 1 - self.r_h)
    }

    pub fn fc_inputs(&self) -> usize {
        let (a, b) = self.conv_shape();
        self.n_filters * a * b
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_r != self.d_e() {
            return Err(Error::Config(format!(
                "plain convolution stacks the entity and relation planes and needs d_e = d_r (got {} vs {})",
                self.d_e(),
                self.d_r
            )));
        }
        if self.n_filters == 0 || self.r_w == 0 || self.r_h == 0 {
            return Err(Error::Config(
                "filters and kernel dims must be positive".into(),
            ));
        }
        if self.r_w > 2 * self.d_w || self.r_h > self.d_h {
            return Err(Error::Config("kernel larger than the stacked plane".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainConvParams {
    pub ent: Tensor2,
    pub rel: Tensor2,
    /// `n_filters × (r_w·r_h)`.
    pub filters: Tensor2,
    pub fc_w: Tensor2,
    pub fc_b: Tensor2,
    pub out_w: Tensor2,
    pub out_b: Tensor2,
    pub bn: BatchNormState,
}

impl PlainConvParams {
    pub fn init(cfg: &PlainConvConfig, n_entities: usize, n_relations: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = RngStream::new(cfg.seed, STREAM_BASELINE_INIT);
        let mut uni = |rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let v = (0..rows * cols)
                .map(|_| rng.uniform_in(-bound, bound))
                .collect();
            Tensor2::from_vec(rows, cols, v).expect("sized")
        };
        let d_e = cfg.d_e();
        Ok(Self {
            ent: uni(n_entities, d_e),
            rel: uni(n_relations, d_e),
            filters: uni(cfg.n_filters, cfg.r_w * cfg.r_h),
            fc_w: uni(cfg.fc_inputs(), d_e),
            fc_b: Tensor2::zeros(1, d_e),
            out_w: uni(d_e, d_e),
            out_b: Tensor2::zeros(1, d_e),
            bn: BatchNormState::default(),
        })
    }

    pub fn n_learned(&self) -> usize {
        [
            &self.ent,
            &self.rel,
            &self.filters,
            &self.fc_w,
            &self.fc_b,
            &self.out_w,
            &self.out_b,
        ]
        .iter()
        .map(|t| t.len())
        .sum::<usize>()
            + 2
    }
}

/// Learned-scalar count of the baseline.
pub fn count_plain_conv_parameters(
    cfg: &PlainConvConfig,
    n_entities: usize,
    n_relations: usize,
) -> usize {
    let d_e = cfg.d_e();
    n_entities * d_e
        + n_relations * d_e
        + cfg.n_filters * cfg.r_w * cfg.r_h
        + cfg.fc_inputs() * d_e
        + d_e
        + d_e * d_e
        + d_e
        + 2
}

/// Scores `(head, relation)` against every entity with the baseline.
pub fn score_plain_conv(
    head: usize,
    relation: usize,
    params: &PlainConvParams,
    cfg: &PlainConvConfig,
    mode: Mode<'_>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d_e = cfg.d_e();
    if head >= params.ent.rows() {
        return Err(Error::Index {
            index: head,
            len: params.ent.rows(),
        });
    }
    if relation >= params.rel.rows() {
        return Err(Error::Index {
            index: relation,
            len: params.rel.rows(),
        });
    }
    let mut streams: Option<&mut TrainStreams> = match mode {
        Mode::Train(s) => Some(s),
        Mode::Eval => None,
    };

    let mut stacked: Vec<f64> = params.ent.row(head).to_vec();
    stacked.extend_from_slice(params.rel.row(relation));
    if let Some(s) = streams.as_mut() {
        let mask = dropout_mask(&mut s.dropout_in, cfg.dropout_in, 2 * d_e)?;
        stacked.iter_mut().zip(mask).for_each(|(x, m)| *x *= m);
    }
    let plane = Tensor2::from_vec(2 * cfg.d_w, cfg.d_h, stacked)?;
    let mut maps = Vec::with_capacity(cfg.fc_inputs());
    for f in 0..cfg.n_filters {
        let k = Tensor2::from_vec(cfg.r_w, cfg.r_h, params.filters.row(f).to_vec())?;
        maps.extend_from_slice(conv2d_valid(&plane, &k)?.data());
    }
    let norm_mode = if streams.is_some() {
        NormMode::Train
    } else {
        NormMode::Eval
    };
    let (normed, _, _) = batchnorm_apply(&maps, &params.bn, norm_mode)?;
    let mut features: Vec<f64> = normed.iter().map(|x| x.max(0.0)).collect();
    if let Some(s) = streams.as_mut() {
        let mask = dropout_mask(&mut s.dropout_feat, cfg.dropout_feat, features.len())?;
        features.iter_mut().zip(mask).for_each(|(x, m)| *x *= m);
    }
    let mut hidden = vec_mat(&features, &params.fc_w);
    for (v, b) in hidden.iter_mut().zip(params.fc_b.data()) {
        *v = (*v + b).max(0.0);
    }
    if let Some(s) = streams.as_mut() {
        let mask = dropout_mask(&mut s.dropout_out, cfg.dropout_out, d_e)?;
        hidden.iter_mut().zip(mask).for_each(|(x, m)| *x *= m);
    }
    let mut z = vec_mat(&hidden, &params.out_w);
    for (v, b) in z.iter_mut().zip(params.out_b.data()) {
        *v += b;
    }
    Ok(mat_vec(&params.ent, &z))
}
