//! Experiment runners: ablation table, kernel-fraction sweep and single
//! hyperparameter sweeps, each trained over one or more seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgdata::priori::PrioriTable;
use crate::kgdata::store::{Split, TripleStore};
use crate::model::config::AblationMode;
use crate::model::forward::kernel_fraction_mask;
use crate::training::config::{apply_hyper, TrainConfig};
use crate::training::train::train;

use super::evaluate::{evaluate, MetricsReport};

/// One trained model and its test-split metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub config_hash: String,
    pub best_epoch: Option<usize>,
    pub best_valid_mrr: Option<f64>,
    pub test: MetricsReport,
}

fn run_seeds(
    cfg: &TrainConfig,
    seeds: &[u64],
    store: &TripleStore,
    priori: &PrioriTable,
) -> Result<Vec<SeedRun>> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    seeds
        .iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.model.seed = seed;
            let (params, history) = train(&c, store, priori)?;
            Ok(SeedRun {
                seed,
                config_hash: c.hash(),
                best_epoch: history.best_epoch,
                best_valid_mrr: history.best_valid_mrr,
                test: evaluate(&params, store, priori, Split::Test, &c.model)?,
            })
        })
        .collect()
}

fn mean_mrr(runs: &[SeedRun]) -> f64 {
    runs.iter().map(|r| r.test.mrr).sum::<f64>() / runs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub use_priori: bool,
    pub use_attention: bool,
    pub mean_test_mrr: f64,
    pub runs: Vec<SeedRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    /// `mean MRR(full) ≥ mean MRR(no_both)`, when both modes were run.
    pub full_beats_no_both: Option<bool>,
}

/// Trains one model per mode and seed; everything except the mode flags is
/// shared.
pub fn run_ablation(
    cfg: &TrainConfig,
    store: &TripleStore,
    priori: &PrioriTable,
    modes: &[AblationMode],
    seeds: &[u64],
) -> Result<AblationTable> {
    if modes.is_empty() {
        return Err(Error::Config("no ablation modes given".into()));
    }
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut c = cfg.clone();
        c.model = mode.apply(&cfg.model);
        let runs = run_seeds(&c, seeds, store, priori)?;
        rows.push(AblationRow {
            mode,
            use_priori: c.model.use_priori,
            use_attention: c.model.use_attention,
            mean_test_mrr: mean_mrr(&runs),
            runs,
        });
    }
    let mean_of = |m: AblationMode| rows.iter().find(|r| r.mode == m).map(|r| r.mean_test_mrr);
    let full_beats_no_both = match (mean_of(AblationMode::Full), mean_of(AblationMode::NoBoth)) {
        (Some(f), Some(n)) => Some(f >= n),
        _ => None,
    };
    Ok(AblationTable {
        rows,
        full_beats_no_both,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionRow {
    pub fraction: f64,
    pub active_kernels: usize,
    pub mean_test_mrr: f64,
    pub runs: Vec<SeedRun>,
}

/// One model per kernel fraction (and seed).
pub fn run_fraction_sweep(
    cfg: &TrainConfig,
    store: &TripleStore,
    priori: &PrioriTable,
    fractions: &[f64],
    seeds: &[u64],
) -> Result<Vec<FractionRow>> {
    if fractions.is_empty() {
        return Err(Error::Config("no kernel fractions given".into()));
    }
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let active_kernels = kernel_fraction_mask(&cfg.model, fraction)?.len();
        let mut c = cfg.clone();
        c.model.kernel_fraction = fraction;
        let runs = run_seeds(&c, seeds, store, priori)?;
        rows.push(FractionRow {
            fraction,
            active_kernels,
            mean_test_mrr: mean_mrr(&runs),
            runs,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub mean_test_mrr: f64,
    pub runs: Vec<SeedRun>,
}

/// One model per value of a named hyperparameter (`lambda`,
/// `kernel_size`, `embedding_dim`, or any numeric model field).
pub fn run_param_sweep(
    cfg: &TrainConfig,
    store: &TripleStore,
    priori: &PrioriTable,
    parameter: &str,
    values: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config(format!("no values given for `{parameter}`")));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut c = cfg.clone();
        c.model = apply_hyper(&cfg.model, parameter, value)?;
        let runs = run_seeds(&c, seeds, store, priori)?;
        rows.push(SweepRow {
            parameter: parameter.to_owned(),
            value,
            mean_test_mrr: mean_mrr(&runs),
            runs,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::priori::build_priori;
    use crate::kgdata::toy::generate_toy_kg;
    use crate::model::config::ModelConfig;

    fn small() -> (TrainConfig, TripleStore, PrioriTable) {
        let ds = generate_toy_kg(2, 24, 2, 1).unwrap();
        let store = ds.store.augment_reciprocal().unwrap();
        let priori = build_priori(&store, 2.0).unwrap();
        let cfg = TrainConfig {
            model: ModelConfig {
                d_w: 4,
                d_h: 3,
                r_w: 2,
                r_h: 2,
                m: 4,
                k: 2,
                batch_size: 16,
                ..Default::default()
            },
            max_epochs: 2,
            eval_every: 1,
            ..Default::default()
        };
        (cfg, store, priori)
    }

    #[test]
    fn ablation_table_shape() {
        let (cfg, store, priori) = small();
        let t = run_ablation(&cfg, &store, &priori, &AblationMode::ALL, &[1]).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.full_beats_no_both.is_some());
        let again = run_ablation(&cfg, &store, &priori, &AblationMode::ALL, &[1]).unwrap();
        assert_eq!(
            serde_json::to_string(&t.rows.iter().map(|r| r.mean_test_mrr).collect::<Vec<_>>())
                .unwrap(),
            serde_json::to_string(
                &again
                    .rows
                    .iter()
                    .map(|r| r.mean_test_mrr)
                    .collect::<Vec<_>>()
            )
            .unwrap()
        );
        assert!(run_ablation(&cfg, &store, &priori, &[], &[1]).is_err());
    }

    #[test]
    fn fraction_rows_record_active_counts() {
        let (cfg, store, priori) = small();
        let rows = run_fraction_sweep(&cfg, &store, &priori, &[0.25, 1.0], &[1]).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.active_kernels).collect::<Vec<_>>(),
            [1, 4]
        );
        assert!(run_fraction_sweep(&cfg, &store, &priori, &[0.0], &[1]).is_err());
    }

    #[test]
    fn param_sweep_rows() {
        let (cfg, store, priori) = small();
        let rows = run_param_sweep(&cfg, &store, &priori, "lambda", &[0.1, 0.4], &[1]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_ne!(rows[0].runs[0].config_hash, rows[1].runs[0].config_hash);
    }
}
