//! The dynamic-convolution scorer: configuration, parameters, forward and
//! backward passes, checkpoints and a plain-convolution reference model.

pub mod baseline;
pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod gradcheck;
pub mod params;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use baseline::{
    count_plain_conv_parameters, score_plain_conv, PlainConvConfig, PlainConvParams,
};
pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::{config_hash, AblationMode, ModelConfig};
pub use forward::{
    backward, forward_batch, forward_score, kernel_fraction_mask, ForwardTrace, Mode, QueryTrace,
};
pub use gradcheck::{gradcheck, tiny_config, BnCheckMode, GradcheckProblem, GradcheckReport};
pub use params::{ModelGrads, ModelParams, BLOCK_NAMES};

/// Learned-scalar counts reported by `count_parameters`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterCount {
    pub convd: usize,
    /// Plain-convolution reference with `k` filters, when requested.
    pub baseline: Option<usize>,
}

/// Closed-form count of learned scalars; `n_relations` is the augmented count.
pub fn count_parameters(
    cfg: &ModelConfig,
    n_entities: usize,
    n_relations: usize,
    include_baseline: bool,
) -> Result<ParameterCount> {
    cfg.validate()?;
    let (d_e, kl) = (cfg.d_e(), cfg.kernel_len());
    let convd = n_entities * d_e
        + n_relations * cfg.d_r()
        + cfg.k * d_e
        + cfg.k * kl
        + kl
        + cfg.m
        + cfg.conv_map() * d_e
        + d_e
        + d_e * d_e
        + d_e
        + 2;
    let baseline = if include_baseline {
        let b = PlainConvConfig::from_model(cfg, cfg.k)?;
        Some(count_plain_conv_parameters(&b, n_entities, n_relations))
    } else {
        None
    };
    Ok(ParameterCount { convd, baseline })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_allocated_arrays() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&cfg, 40, 6).unwrap();
        let c = count_parameters(&cfg, 40, 6, false).unwrap();
        assert_eq!(c.convd, p.n_learned());
        assert_eq!(c.baseline, None);
    }

    #[test]
    fn baseline_needs_equal_widths() {
        let cfg = ModelConfig::default();
        assert!(count_parameters(&cfg, 40, 6, true).is_err());
        let sq = ModelConfig {
            d_w: 9,
            d_h: 9,
            ..cfg
        };
        let c = count_parameters(&sq, 40, 6, true).unwrap();
        assert!(c.baseline.unwrap() > 0);
    }
}
