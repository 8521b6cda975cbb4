//! Filtered ranking metrics (MRR, Hits@N) with tie-averaged ranks, and the
//! ablation and sweep runners.

pub mod evaluate;
pub mod rank;
pub mod runners;

pub use evaluate::{
    constant_scorer_mrr, eval_queries, evaluate, evaluate_scores, Direction, EvalQuery,
    MetricsReport,
};
pub use rank::{rank_of, RankMetrics, HITS_AT};
pub use runners::{
    run_ablation, run_fraction_sweep, run_param_sweep, AblationRow, AblationTable, FractionRow,
    SeedRun, SweepRow,
};
