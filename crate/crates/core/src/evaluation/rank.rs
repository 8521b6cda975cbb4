//! Filtered, tie-averaged ranks and the metrics derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HITS_AT: [usize; 3] = [1, 3, 10];

/// Rank of `true_id` among the entities outside `filter_out` (the true
/// entity always competes): `1 + #strictly greater + #ties / 2`.
pub fn rank_of(scores: &[f64], true_id: usize, filter_out: &[usize]) -> Result<f64> {
    if true_id >= scores.len() {
        return Err(Error::Index {
            index: true_id,
            len: scores.len(),
        });
    }
    let mut skip = vec![false; scores.len()];
    for &f in filter_out {
        if f < skip.len() {
            skip[f] = true;
        }
    }
    skip[true_id] = false;
    let target = scores[true_id];
    let (mut greater, mut ties) = (0usize, 0usize);
    for (i, &s) in scores.iter().enumerate() {
        if skip[i] || i == true_id {
            continue;
        }
        if s > target {
            greater += 1;
        } else if s == target {
            ties += 1;
        }
    }
    Ok(1.0 + greater as f64 + ties as f64 / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub n_queries: usize,
}

impl RankMetrics {
    /// Mean reciprocal rank and Hits@{1,3,10}; `rank ≤ N` is applied to the
    /// real-valued rank directly.
    pub fn from_ranks(ranks: &[f64]) -> Self {
        let n = ranks.len();
        let denom = n.max(1) as f64;
        let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / denom;
        let hits = HITS_AT
            .iter()
            .map(|&k| {
                let c = ranks.iter().filter(|&&r| r <= k as f64).count();
                (k, c as f64 / denom)
            })
            .collect();
        Self {
            mrr,
            hits,
            n_queries: n,
        }
    }

    pub fn hits_at(&self, k: usize) -> f64 {
        self.hits.get(&k).copied().unwrap_or(0.0)
    }
}
