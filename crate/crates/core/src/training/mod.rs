//! 1-N training with BCE and label smoothing, Adam updates, early stopping
//! on validation MRR, and hyperparameter search.

pub mod config;
pub mod history;
pub mod loss;
pub mod search;
pub mod train;

pub use config::{apply_hyper, factor_plane, TrainConfig};
pub use history::{early_stop, EpochRecord, TrainHistory};
pub use loss::bce_loss;
pub use search::{hyper_search, LeaderboardEntry, SearchPhase, SearchResult};
pub use train::{
    adam_for, apply_step, batch_gradients, train, train_with, BatchStep, TrainObserver,
};
