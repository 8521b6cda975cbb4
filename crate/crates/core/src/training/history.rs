//! Per-epoch training records and the early-stopping rule.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean BCE over the epoch's queries.
    pub train_loss: f64,
    /// Filtered validation MRR, present on evaluation epochs only.
    pub valid_mrr: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_valid_mrr: Option<f64>,
}

impl TrainHistory {
    /// Appends a record; a validation MRR strictly above the best so far
    /// becomes the new best. Returns whether it did.
    pub fn push(&mut self, record: EpochRecord) -> bool {
        debug_assert!(self.records.last().is_none_or(|r| r.epoch < record.epoch));
        let improved = match (record.valid_mrr, self.best_valid_mrr) {
            (Some(v), Some(best)) => v > best,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            self.best_valid_mrr = record.valid_mrr;
            self.best_epoch = Some(record.epoch);
        }
        self.records.push(record);
        improved
    }

    /// Number of validation evaluations recorded after the best one.
    pub fn evals_since_best(&self) -> usize {
        let Some(best) = self.best_epoch else {
            return 0;
        };
        self.records
            .iter()
            .filter(|r| r.epoch > best && r.valid_mrr.is_some())
            .count()
    }

    /// Records with the wall-clock field cleared, for reproducibility checks.
    pub fn without_timing(&self) -> TrainHistory {
        let mut h = self.clone();
        h.records.iter_mut().for_each(|r| r.wall_ms = 0);
        h
    }
}

/// True once `patience` evaluations have passed without a strict
/// improvement over the best validation MRR.
pub fn early_stop(history: &TrainHistory, patience: usize) -> bool {
    history.best_epoch.is_some() && history.evals_since_best() >= patience
}
