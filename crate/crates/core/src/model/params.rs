//! Learned arrays of the scorer and their gradients.

use crate::attention::AttentionParams;
use crate::error::{Error, Result};
use crate::numerics::batchnorm::BatchNormState;
use crate::numerics::rng::{RngStream, STREAM_INIT};
use crate::numerics::tensor::Tensor2;

use super::config::ModelConfig;

/// Names of the learned blocks, in the order used by optimizers,
/// gradient checks and checkpoints.
pub const BLOCK_NAMES: [&str; 12] = [
    "ent",
    "rel",
    "attn.query",
    "attn.key",
    "attn.value",
    "attn.priori_mod",
    "fc.weight",
    "fc.bias",
    "out.weight",
    "out.bias",
    "bn.gamma",
    "bn.beta",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `|E| × d_e`; both head and candidate-tail embeddings.
    pub ent: Tensor2,
    /// `|R| × d_r`; each row is sliced into the kernel bank.
    pub rel: Tensor2,
    pub attn: AttentionParams,
    /// `conv_map × d_e`.
    pub fc_w: Tensor2,
    pub fc_b: Tensor2,
    /// `d_e × d_e`.
    pub out_w: Tensor2,
    pub out_b: Tensor2,
    pub bn: BatchNormState,
}

fn uniform_fan(rng: &mut RngStream, rows: usize, cols: usize) -> Tensor2 {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_in(-bound, bound))
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("sized")
}

/// `m` evenly spaced values in `[-0.1, 0.1]`.
fn priori_mod_init(m: usize) -> Tensor2 {
    let data = (0..m)
        .map(|i| {
            if m == 1 {
                0.0
            } else {
                -0.1 + 0.2 * i as f64 / (m - 1) as f64
            }
        })
        .collect();
    Tensor2::row_vector(data)
}

impl ModelParams {
    /// Fan-scaled uniform weights from the `init` stream of `cfg.seed`,
    /// zero biases, identity batch norm.
    pub fn init(cfg: &ModelConfig, n_entities: usize, n_relations: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = RngStream::new(cfg.seed, STREAM_INIT);
        let (d_e, d_r, kl) = (cfg.d_e(), cfg.d_r(), cfg.kernel_len());
        Ok(Self {
            ent: uniform_fan(&mut rng, n_entities, d_e),
            rel: uniform_fan(&mut rng, n_relations, d_r),
            attn: AttentionParams {
                query_proj: uniform_fan(&mut rng, cfg.k, d_e),
                key_proj: uniform_fan(&mut rng, cfg.k, kl),
                value_proj: uniform_fan(&mut rng, 1, kl),
                priori_mod: priori_mod_init(cfg.m),
                lambda: cfg.lambda,
            },
            fc_w: uniform_fan(&mut rng, cfg.conv_map(), d_e),
            fc_b: Tensor2::zeros(1, d_e),
            out_w: uniform_fan(&mut rng, d_e, d_e),
            out_b: Tensor2::zeros(1, d_e),
            bn: BatchNormState::default(),
        })
    }

    pub fn n_entities(&self) -> usize {
        self.ent.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.rel.rows()
    }

    /// Checks every array shape against `cfg`.
    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let (d_e, d_r, kl) = (cfg.d_e(), cfg.d_r(), cfg.kernel_len());
        let expected = [
            (self.ent.cols(), d_e),
            (self.rel.cols(), d_r),
            (self.attn.query_proj.rows(), cfg.k),
            (self.attn.query_proj.cols(), d_e),
            (self.attn.key_proj.rows(), cfg.k),
            (self.attn.key_proj.cols(), kl),
            (self.attn.value_proj.len(), kl),
            (self.attn.priori_mod.len(), cfg.m),
            (self.fc_w.rows(), cfg.conv_map()),
            (self.fc_w.cols(), d_e),
            (self.fc_b.len(), d_e),
            (self.out_w.rows(), d_e),
            (self.out_w.cols(), d_e),
            (self.out_b.len(), d_e),
        ];
        if let Some((i, (got, want))) = expected.iter().enumerate().find(|(_, (g, w))| g != w) {
            return Err(Error::Config(format!(
                "parameter shape check {i} failed: {got} != {want}"
            )));
        }
        Ok(())
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.ent.data(),
            self.rel.data(),
            self.attn.query_proj.data(),
            self.attn.key_proj.data(),
            self.attn.value_proj.data(),
            self.attn.priori_mod.data(),
            self.fc_w.data(),
            self.fc_b.data(),
            self.out_w.data(),
            self.out_b.data(),
            std::slice::from_ref(&self.bn.gamma),
            std::slice::from_ref(&self.bn.beta),
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.ent.data_mut(),
            self.rel.data_mut(),
            self.attn.query_proj.data_mut(),
            self.attn.key_proj.data_mut(),
            self.attn.value_proj.data_mut(),
            self.attn.priori_mod.data_mut(),
            self.fc_w.data_mut(),
            self.fc_b.data_mut(),
            self.out_w.data_mut(),
            self.out_b.data_mut(),
            std::slice::from_mut(&mut self.bn.gamma),
            std::slice::from_mut(&mut self.bn.beta),
        ]
    }

    /// Overwrites the learned blocks from flat vectors in [`BLOCK_NAMES`] order.
    pub fn set_blocks(&mut self, blocks: &[Vec<f64>]) -> Result<()> {
        let mut targets = self.blocks_mut();
        if blocks.len() != targets.len() {
            return Err(Error::Dimension("block count".into()));
        }
        for (t, b) in targets.iter_mut().zip(blocks) {
            if t.len() != b.len() {
                return Err(Error::Dimension("block length".into()));
            }
            t.copy_from_slice(b);
        }
        Ok(())
    }

    pub fn n_learned(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
            && self.bn.running_mean.is_finite()
            && self.bn.running_var.is_finite()
    }
}

/// Gradients congruent with the learned blocks of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub ent: Tensor2,
    pub rel: Tensor2,
    pub attn_query: Tensor2,
    pub attn_key: Tensor2,
    pub attn_value: Tensor2,
    pub attn_priori_mod: Tensor2,
    pub fc_w: Tensor2,
    pub fc_b: Tensor2,
    pub out_w: Tensor2,
    pub out_b: Tensor2,
    pub bn_gamma: f64,
    pub bn_beta: f64,
}

impl ModelGrads {
    pub fn zeros_like(p: &ModelParams) -> Self {
        let z = |t: &Tensor2| Tensor2::zeros(t.rows(), t.cols());
        Self {
            ent: z(&p.ent),
            rel: z(&p.rel),
            attn_query: z(&p.attn.query_proj),
            attn_key: z(&p.attn.key_proj),
            attn_value: z(&p.attn.value_proj),
            attn_priori_mod: z(&p.attn.priori_mod),
            fc_w: z(&p.fc_w),
            fc_b: z(&p.fc_b),
            out_w: z(&p.out_w),
            out_b: z(&p.out_b),
            bn_gamma: 0.0,
            bn_beta: 0.0,
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.ent.data(),
            self.rel.data(),
            self.attn_query.data(),
            self.attn_key.data(),
            self.attn_value.data(),
            self.attn_priori_mod.data(),
            self.fc_w.data(),
            self.fc_b.data(),
            self.out_w.data(),
            self.out_b.data(),
            std::slice::from_ref(&self.bn_gamma),
            std::slice::from_ref(&self.bn_beta),
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.ent.data_mut(),
            self.rel.data_mut(),
            self.attn_query.data_mut(),
            self.attn_key.data_mut(),
            self.attn_value.data_mut(),
            self.attn_priori_mod.data_mut(),
            self.fc_w.data_mut(),
            self.fc_b.data_mut(),
            self.out_w.data_mut(),
            self.out_b.data_mut(),
            std::slice::from_mut(&mut self.bn_gamma),
            std::slice::from_mut(&mut self.bn_beta),
        ]
    }

    pub fn scale(&mut self, s: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v *= s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            d_w: 4,
            d_h: 3,
            r_w: 2,
            r_h: 2,
            m: 4,
            k: 2,
            ..Default::default()
        }
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = ModelParams::init(&tiny(), 7, 3).unwrap();
        let b = ModelParams::init(&tiny(), 7, 3).unwrap();
        assert_eq!(a, b);
        a.check(&tiny()).unwrap();
        assert_eq!(a.blocks().len(), BLOCK_NAMES.len());
        assert!(a.fc_b.data().iter().all(|&v| v == 0.0));
        let u = a.attn.priori_mod.data();
        assert_eq!(u.first(), Some(&-0.1));
        assert!((u[3] - 0.1).abs() < 1e-15);
        let bound = (6.0f64 / 19.0).sqrt();
        assert!(a.ent.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn set_blocks_round_trips() {
        let a = ModelParams::init(&tiny(), 7, 3).unwrap();
        let mut b = ModelParams::init(&ModelConfig { seed: 99, ..tiny() }, 7, 3).unwrap();
        assert_ne!(a, b);
        let flat: Vec<Vec<f64>> = a.blocks().iter().map(|s| s.to_vec()).collect();
        b.set_blocks(&flat).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_check_catches_mismatch() {
        let a = ModelParams::init(&tiny(), 7, 3).unwrap();
        let other = ModelConfig { k: 3, ..tiny() };
        assert!(matches!(a.check(&other), Err(Error::Config(_))));
    }
}
