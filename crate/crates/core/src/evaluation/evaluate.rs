//! Filtered link-prediction evaluation in both directions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgdata::priori::PrioriTable;
use crate::kgdata::store::{Split, TripleStore};
use crate::model::config::ModelConfig;
use crate::model::forward::{forward_batch, Mode};
use crate::model::params::ModelParams;

use super::rank::{rank_of, RankMetrics};

/// Queries scored per eval-mode forward call.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `(h, r, ?)`.
    Tail,
    /// `(?, r, t)` asked as `(t, r⁻¹, ?)`.
    Head,
}

/// One ranking question: score `(head, relation, ·)`, find `answer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalQuery {
    pub head: usize,
    pub relation: usize,
    pub answer: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub n_queries: usize,
    pub tail: RankMetrics,
    pub head: RankMetrics,
}

impl MetricsReport {
    pub fn hits_at(&self, k: usize) -> f64 {
        self.hits.get(&k).copied().unwrap_or(0.0)
    }
}

/// Tail and reciprocal-head queries for every original triple of `split`.
pub fn eval_queries(store: &TripleStore, split: Split) -> Result<Vec<EvalQuery>> {
    let base = store
        .base_relations()
        .ok_or_else(|| Error::State("evaluation needs a reciprocal-augmented store".into()))?;
    let triples = store.base_split(split);
    let mut out = Vec::with_capacity(2 * triples.len());
    for t in triples {
        out.push(EvalQuery {
            head: t.head,
            relation: t.relation,
            answer: t.tail,
            direction: Direction::Tail,
        });
    }
    for t in triples {
        out.push(EvalQuery {
            head: t.tail,
            relation: t.relation + base,
            answer: t.head,
            direction: Direction::Head,
        });
    }
    Ok(out)
}

/// Ranks every query of `split` with an arbitrary batch scorer. The scorer
/// is called once per distinct `(head, relation)`, in key order.
pub fn evaluate_scores<F>(store: &TripleStore, split: Split, mut scorer: F) -> Result<MetricsReport>
where
    F: FnMut(&[(usize, usize)]) -> Result<Vec<Vec<f64>>>,
{
    let queries = eval_queries(store, split)?;
    if queries.is_empty() {
        return Err(Error::Dimension(format!(
            "the {} split is empty",
            split.name()
        )));
    }
    let mut keys: Vec<(usize, usize)> = queries.iter().map(|q| (q.head, q.relation)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut scores: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for chunk in keys.chunks(EVAL_CHUNK) {
        let rows = scorer(chunk)?;
        if rows.len() != chunk.len() {
            return Err(Error::Dimension(
                "scorer returned the wrong number of rows".into(),
            ));
        }
        scores.extend(chunk.iter().copied().zip(rows));
    }

    let (mut tail, mut head, mut all) = (Vec::new(), Vec::new(), Vec::new());
    for q in &queries {
        let row = &scores[&(q.head, q.relation)];
        if row.len() != store.n_entities() {
            return Err(Error::Dimension("score row length differs from |E|".into()));
        }
        let r = rank_of(row, q.answer, store.filtered_candidates(q.head, q.relation))?;
        all.push(r);
        match q.direction {
            Direction::Tail => tail.push(r),
            Direction::Head => head.push(r),
        }
    }
    let combined = RankMetrics::from_ranks(&all);
    Ok(MetricsReport {
        mrr: combined.mrr,
        hits: combined.hits,
        n_queries: combined.n_queries,
        tail: RankMetrics::from_ranks(&tail),
        head: RankMetrics::from_ranks(&head),
    })
}

/// Filtered MRR and Hits@{1,3,10} of the model on `split` (eval mode).
pub fn evaluate(
    params: &ModelParams,
    store: &TripleStore,
    priori: &PrioriTable,
    split: Split,
    cfg: &ModelConfig,
) -> Result<MetricsReport> {
    if !params.is_finite() {
        return Err(Error::Numeric(
            "cannot evaluate non-finite parameters".into(),
        ));
    }
    evaluate_scores(store, split, |keys| {
        let trace = forward_batch(keys, params, priori, cfg, Mode::Eval)?;
        Ok(trace.queries.into_iter().map(|q| q.logits).collect())
    })
}

/// MRR of a scorer that gives every entity the same score.
pub fn constant_scorer_mrr(store: &TripleStore, split: Split) -> Result<f64> {
    let n = store.n_entities();
    Ok(evaluate_scores(store, split, |keys| Ok(vec![vec![0.0; n]; keys.len()]))?.mrr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::store::Triple;

    fn store() -> TripleStore {
        let t = Triple::new;
        TripleStore::new(
            5,
            2,
            vec![t(0, 0, 1), t(0, 0, 2), t(1, 1, 3)],
            vec![t(2, 0, 4)],
            vec![t(0, 0, 3), t(3, 1, 4)],
        )
        .unwrap()
        .augment_reciprocal()
        .unwrap()
    }

    #[test]
    fn two_queries_per_triple() {
        let s = store();
        let q = eval_queries(&s, Split::Test).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(
            q[2],
            EvalQuery {
                head: 3,
                relation: 2,
                answer: 0,
                direction: Direction::Head
            }
        );
    }

    #[test]
    fn oracle_scorer_is_perfect() {
        let s = store();
        let truth: Vec<EvalQuery> = eval_queries(&s, Split::Test).unwrap();
        let r = evaluate_scores(&s, Split::Test, |keys| {
            Ok(keys
                .iter()
                .map(|&(h, r)| {
                    let mut row = vec![0.0; 5];
                    for q in truth.iter().filter(|q| q.head == h && q.relation == r) {
                        row[q.answer] = 1.0;
                    }
                    row
                })
                .collect())
        })
        .unwrap();
        assert_eq!(r.mrr, 1.0);
        assert_eq!(r.hits_at(1), 1.0);
        assert_eq!(r.n_queries, 4);
    }

    #[test]
    fn constant_scorer_matches_closed_form() {
        let s = store();
        let mut expected = 0.0;
        let qs = eval_queries(&s, Split::Test).unwrap();
        for q in &qs {
            let others = s
                .filtered_candidates(q.head, q.relation)
                .iter()
                .filter(|&&e| e != q.answer)
                .count();
            let competitors = 5 - 1 - others;
            expected += 1.0 / (1.0 + competitors as f64 / 2.0);
        }
        expected /= qs.len() as f64;
        assert!((constant_scorer_mrr(&s, Split::Test).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn unaugmented_store_is_rejected() {
        let s = TripleStore::new(2, 1, vec![Triple::new(0, 0, 1)], vec![], vec![]).unwrap();
        assert!(matches!(
            eval_queries(&s, Split::Train),
            Err(Error::State(_))
        ));
    }
}
