//! Grid search followed by seeded random refinement around the grid winner.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgdata::priori::PrioriTable;
use crate::kgdata::store::TripleStore;
use crate::model::count_parameters;
use crate::numerics::rng::RngStream;

use super::config::{apply_hyper, TrainConfig};
use super::train::train;

pub const STREAM_SEARCH: &str = "search";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPhase {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub phase: SearchPhase,
    /// The hyperparameter values that define this point.
    pub point: BTreeMap<String, f64>,
    pub config_hash: String,
    pub valid_mrr: f64,
    pub best_epoch: Option<usize>,
    pub n_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: TrainConfig,
    /// Sorted best first.
    pub leaderboard: Vec<LeaderboardEntry>,
}

/// Leaderboard order: higher validation MRR, then fewer parameters, then
/// lower config hash.
pub fn rank_entries(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    b.valid_mrr
        .total_cmp(&a.valid_mrr)
        .then(a.n_params.cmp(&b.n_params))
        .then_with(|| a.config_hash.cmp(&b.config_hash))
}

/// Every combination of the grid values, keys in sorted order.
pub fn grid_points(grid: &BTreeMap<String, Vec<f64>>) -> Vec<BTreeMap<String, f64>> {
    let mut points = vec![BTreeMap::new()];
    for (key, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Applies a point to `base`; the search fields themselves are kept.
pub fn config_at(base: &TrainConfig, point: &BTreeMap<String, f64>) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    for (k, &v) in point {
        cfg.model = apply_hyper(&cfg.model, k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Draws a point uniformly from the box spanned by each winning value's
/// neighbours in its (sorted) grid list. Integer-valued keys are rounded;
/// `m` is rounded to a perfect square.
fn neighbourhood_draw(
    grid: &BTreeMap<String, Vec<f64>>,
    winner: &BTreeMap<String, f64>,
    rng: &mut RngStream,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (key, values) in grid {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let w = winner[key];
        let pos = sorted.iter().position(|&v| v == w).unwrap_or(0);
        let lo = sorted[pos.saturating_sub(1)];
        let hi = sorted[(pos + 1).min(sorted.len() - 1)];
        let integral = values.iter().all(|v| v.fract() == 0.0);
        let v = if key == "m" {
            let r = rng.uniform_in(lo.sqrt(), hi.sqrt()).round().max(1.0);
            r * r
        } else if integral {
            rng.uniform_in(lo, hi).round()
        } else {
            rng.uniform_in(lo, hi)
        };
        out.insert(key.clone(), v);
    }
    out
}

fn run_point(
    base: &TrainConfig,
    point: BTreeMap<String, f64>,
    phase: SearchPhase,
    store: &TripleStore,
    priori: &PrioriTable,
) -> Result<LeaderboardEntry> {
    let cfg = config_at(base, &point)?;
    let (_, history) = train(&cfg, store, priori)?;
    let n_params =
        count_parameters(&cfg.model, store.n_entities(), store.n_relations(), false)?.convd;
    Ok(LeaderboardEntry {
        phase,
        point,
        config_hash: cfg.hash(),
        valid_mrr: history.best_valid_mrr.unwrap_or(0.0),
        best_epoch: history.best_epoch,
        n_params,
    })
}

/// Trains every grid point, then `random_search_draws` points drawn around
/// the grid winner, and returns the overall winner with the leaderboard.
pub fn hyper_search(
    base: &TrainConfig,
    store: &TripleStore,
    priori: &PrioriTable,
) -> Result<SearchResult> {
    base.validate()?;
    base.validate_grid()?;
    let mut board = Vec::new();
    for point in grid_points(&base.grid) {
        board.push(run_point(base, point, SearchPhase::Grid, store, priori)?);
    }
    board.sort_by(rank_entries);
    let grid_winner = board[0].point.clone();

    let mut rng = RngStream::new(base.model.seed, STREAM_SEARCH);
    for _ in 0..base.random_search_draws {
        let point = neighbourhood_draw(&base.grid, &grid_winner, &mut rng);
        board.push(run_point(base, point, SearchPhase::Random, store, priori)?);
    }
    board.sort_by(rank_entries);
    let best = config_at(base, &board[0].point)?;
    if best.hash() != board[0].config_hash {
        return Err(Error::State(
            "search winner does not reproduce its hash".into(),
        ));
    }
    Ok(SearchResult {
        best,
        leaderboard: board,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(mrr: f64, n: usize, hash: &str) -> LeaderboardEntry {
        LeaderboardEntry {
            phase: SearchPhase::Grid,
            point: BTreeMap::new(),
            config_hash: hash.into(),
            valid_mrr: mrr,
            best_epoch: None,
            n_params: n,
        }
    }

    #[test]
    fn tie_breaks() {
        let mut v = [
            entry(0.5, 10, "b"),
            entry(0.5, 10, "a"),
            entry(0.5, 5, "z"),
            entry(0.6, 99, "q"),
        ];
        v.sort_by(rank_entries);
        let hashes: Vec<&str> = v.iter().map(|e| e.config_hash.as_str()).collect();
        assert_eq!(hashes, ["q", "z", "a", "b"]);
    }

    #[test]
    fn grid_is_a_cartesian_product() {
        let base = TrainConfig::default();
        let pts = grid_points(&base.grid);
        assert_eq!(pts.len(), 20);
        assert_eq!(pts[0]["embedding_dim"], 100.0);
        assert_eq!(pts[0]["lambda"], 0.1);
        assert_eq!(pts[1]["lambda"], 0.2);
    }

    #[test]
    fn draws_stay_in_the_neighbourhood() {
        let mut grid = BTreeMap::new();
        grid.insert("lambda".to_owned(), vec![0.1, 0.2, 0.3, 0.4]);
        grid.insert("m".to_owned(), vec![4.0, 9.0, 16.0]);
        grid.insert("embedding_dim".to_owned(), vec![100.0, 200.0]);
        let mut winner = BTreeMap::new();
        winner.insert("lambda".to_owned(), 0.2);
        winner.insert("m".to_owned(), 4.0);
        winner.insert("embedding_dim".to_owned(), 200.0);
        let mut rng = RngStream::new(3, STREAM_SEARCH);
        for _ in 0..200 {
            let p = neighbourhood_draw(&grid, &winner, &mut rng);
            assert!((0.1..=0.3).contains(&p["lambda"]));
            assert!(p["m"] == 4.0 || p["m"] == 9.0);
            assert!((100.0..=200.0).contains(&p["embedding_dim"]));
            assert_eq!(p["embedding_dim"].fract(), 0.0);
        }
    }
}
