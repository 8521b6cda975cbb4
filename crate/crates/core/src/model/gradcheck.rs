//! Whole-model gradient check against central finite differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgdata::priori::PrioriTable;
use crate::numerics::gradcheck::{finite_diff_grad, relative_error};
use crate::numerics::rng::{RngStream, TrainStreams};
use crate::training::loss::bce_loss;

use super::config::ModelConfig;
use super::forward::{backward, forward_batch, Mode};
use super::params::{ModelParams, BLOCK_NAMES};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_STEP: f64 = 1e-5;

/// How batch norm behaves during the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnCheckMode {
    /// Running statistics, as at evaluation time.
    Frozen,
    /// Batch statistics; the loss then couples the queries of the batch.
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockError {
    pub block: String,
    pub size: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub bn_mode: BnCheckMode,
    pub step: f64,
    pub tolerance: f64,
    pub blocks: Vec<BlockError>,
    pub passed: bool,
}

impl GradcheckReport {
    pub fn worst(&self) -> Option<&BlockError> {
        self.blocks
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Problem instance: random parameters, random queries and random targets
/// in `(0, 1)`, all drawn from `seed`.
#[derive(Debug, Clone)]
pub struct GradcheckProblem {
    pub cfg: ModelConfig,
    pub params: ModelParams,
    pub priori: PrioriTable,
    pub queries: Vec<(usize, usize)>,
    pub targets: Vec<Vec<f64>>,
}

impl GradcheckProblem {
    pub fn random(
        cfg: &ModelConfig,
        n_entities: usize,
        n_relations: usize,
        n_queries: usize,
    ) -> Result<Self> {
        if cfg.dropout_in != 0.0 || cfg.dropout_feat != 0.0 || cfg.dropout_out != 0.0 {
            return Err(Error::Config(
                "gradient checking needs every dropout probability set to 0".into(),
            ));
        }
        if cfg.sigmoid_pre_dot {
            return Err(Error::Config(
                "gradient checking runs with sigmoid_pre_dot off".into(),
            ));
        }
        let mut params = ModelParams::init(cfg, n_entities, n_relations)?;
        let mut rng = RngStream::new(cfg.seed, "gradcheck");
        // move away from the symmetric initialization of the small arrays
        for b in params.blocks_mut() {
            b.iter_mut().for_each(|v| *v += rng.uniform_in(-0.3, 0.3));
        }
        params.bn.running_mean = rng.uniform_in(-0.2, 0.2);
        params.bn.running_var = rng.uniform_in(0.5, 1.5);
        let mut counts = std::collections::BTreeMap::new();
        for e in 0..n_entities {
            for r in 0..n_relations {
                if rng.below(2) == 0 {
                    counts.insert((e, r), 1 + rng.below(6) as u64);
                }
            }
        }
        let priori = PrioriTable::from_counts(counts, cfg.priori_base)?;
        let queries: Vec<(usize, usize)> = (0..n_queries)
            .map(|_| (rng.below(n_entities), rng.below(n_relations)))
            .collect();
        let targets = (0..n_queries)
            .map(|_| {
                (0..n_entities)
                    .map(|_| rng.uniform_in(0.05, 0.95))
                    .collect()
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            params,
            priori,
            queries,
            targets,
        })
    }

    fn mode(bn: BnCheckMode, streams: &mut TrainStreams) -> Mode<'_> {
        match bn {
            BnCheckMode::Frozen => Mode::Eval,
            BnCheckMode::Batch => Mode::Train(streams),
        }
    }

    /// Summed BCE over the problem's queries.
    pub fn loss(&self, params: &ModelParams, bn: BnCheckMode) -> Result<f64> {
        let mut streams = TrainStreams::new(self.cfg.seed);
        let trace = forward_batch(
            &self.queries,
            params,
            &self.priori,
            &self.cfg,
            Self::mode(bn, &mut streams),
        )?;
        let mut total = 0.0;
        for (q, y) in trace.queries.iter().zip(&self.targets) {
            total += bce_loss(&q.logits, y)?.0;
        }
        Ok(total)
    }

    pub fn analytic(&self, bn: BnCheckMode) -> Result<Vec<Vec<f64>>> {
        let mut streams = TrainStreams::new(self.cfg.seed);
        let trace = forward_batch(
            &self.queries,
            &self.params,
            &self.priori,
            &self.cfg,
            Self::mode(bn, &mut streams),
        )?;
        let grad_logits = trace
            .queries
            .iter()
            .zip(&self.targets)
            .map(|(q, y)| bce_loss(&q.logits, y).map(|(_, g)| g))
            .collect::<Result<Vec<_>>>()?;
        let g = backward(&trace, &grad_logits, &self.params, &self.cfg)?;
        Ok(g.blocks().iter().map(|b| b.to_vec()).collect())
    }

    pub fn numeric(&self, bn: BnCheckMode, h: f64) -> Result<Vec<Vec<f64>>> {
        let flat: Vec<Vec<f64>> = self.params.blocks().iter().map(|b| b.to_vec()).collect();
        let mut scratch = self.params.clone();
        let mut failure = None;
        let out = finite_diff_grad(
            |blocks| {
                scratch.set_blocks(blocks).expect("same shapes");
                match self.loss(&scratch, bn) {
                    Ok(l) => l,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            &flat,
            h,
        );
        match failure {
            Some(e) => Err(e),
            None => out,
        }
    }
}

/// Compares analytic and numeric gradients block by block.
/// `corrupt_block` flips the sign of one analytic block, to prove the
/// harness notices.
pub fn gradcheck(
    problem: &GradcheckProblem,
    bn_mode: BnCheckMode,
    corrupt_block: Option<usize>,
) -> Result<GradcheckReport> {
    let mut analytic = problem.analytic(bn_mode)?;
    if let Some(b) = corrupt_block {
        let block = analytic.get_mut(b).ok_or(Error::Index {
            index: b,
            len: BLOCK_NAMES.len(),
        })?;
        block.iter_mut().for_each(|v| *v = -*v);
    }
    let numeric = problem.numeric(bn_mode, GRADCHECK_STEP)?;
    let blocks: Vec<BlockError> = BLOCK_NAMES
        .iter()
        .zip(analytic.iter().zip(&numeric))
        .map(|(name, (a, n))| {
            let err = relative_error(a, n);
            BlockError {
                block: name.to_string(),
                size: a.len(),
                max_rel_error: err,
                passed: err <= GRADCHECK_TOLERANCE,
            }
        })
        .collect();
    let passed = blocks.iter().all(|b| b.passed);
    Ok(GradcheckReport {
        bn_mode,
        step: GRADCHECK_STEP,
        tolerance: GRADCHECK_TOLERANCE,
        blocks,
        passed,
    })
}

/// The tiny configuration used for gradient checks: `d_w=4, d_h=3, m=4,
/// r_w=r_h=2, k=2`, dropout off.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        d_w: 4,
        d_h: 3,
        r_w: 2,
        r_h: 2,
        m: 4,
        k: 2,
        dropout_in: 0.0,
        dropout_feat: 0.0,
        dropout_out: 0.0,
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_config_passes_in_both_bn_modes() {
        let p = GradcheckProblem::random(&tiny_config(), 7, 3, 3).unwrap();
        for mode in [BnCheckMode::Frozen, BnCheckMode::Batch] {
            let r = gradcheck(&p, mode, None).unwrap();
            assert!(r.passed, "{mode:?}: {:?}", r.worst());
            assert_eq!(r.blocks.len(), 12);
        }
    }

    #[test]
    fn corrupted_block_is_caught() {
        let p = GradcheckProblem::random(&tiny_config(), 7, 3, 2).unwrap();
        let r = gradcheck(&p, BnCheckMode::Frozen, Some(3)).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst().unwrap().block, "attn.key");
    }

    #[test]
    fn dropout_is_a_precondition_failure() {
        let cfg = ModelConfig {
            dropout_in: 0.2,
            ..tiny_config()
        };
        assert!(matches!(
            GradcheckProblem::random(&cfg, 7, 3, 2),
            Err(Error::Config(_))
        ));
    }
}
