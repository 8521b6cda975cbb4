//! The 1-N mini-batch training loop.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::kgdata::priori::PrioriTable;
use crate::kgdata::store::{Split, TripleStore};
use crate::kgdata::targets::{one_to_n_targets, OneToNTarget};
use crate::model::config::ModelConfig;
use crate::model::forward::{backward, forward_batch, Mode};
use crate::model::params::{ModelGrads, ModelParams};
use crate::numerics::adam::{adam_step, AdamState};
use crate::numerics::batchnorm::BatchNormState;
use crate::numerics::rng::{RngStream, TrainStreams, STREAM_SHUFFLE};

use super::config::TrainConfig;
use super::history::{early_stop, EpochRecord, TrainHistory};
use super::loss::bce_loss;

/// Hooks called by [`train_with`]; both default to no-ops.
pub trait TrainObserver {
    fn on_epoch(&mut self, _record: &EpochRecord) -> Result<()> {
        Ok(())
    }

    fn on_new_best(&mut self, _epoch: usize, _params: &ModelParams) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Loss and gradients of one mini-batch.
#[derive(Debug, Clone)]
pub struct BatchStep {
    /// Mean BCE over the batch's queries.
    pub loss: f64,
    /// Gradient of the mean loss.
    pub grads: ModelGrads,
    pub bn_next: BatchNormState,
}

/// Forward, BCE and backward for one mini-batch in train mode.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &[&OneToNTarget],
    priori: &PrioriTable,
    cfg: &ModelConfig,
    streams: &mut TrainStreams,
) -> Result<BatchStep> {
    let queries: Vec<(usize, usize)> = batch.iter().map(|t| (t.head, t.relation)).collect();
    let trace = forward_batch(&queries, params, priori, cfg, Mode::Train(streams))?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad_logits = Vec::with_capacity(batch.len());
    for (q, t) in trace.queries.iter().zip(batch) {
        let (l, mut g) = bce_loss(&q.logits, &t.smoothed())?;
        loss += l;
        g.iter_mut().for_each(|v| *v *= scale);
        grad_logits.push(g);
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite training loss {loss}")));
    }
    let grads = backward(&trace, &grad_logits, params, cfg)?;
    Ok(BatchStep {
        loss,
        grads,
        bn_next: trace.bn_next,
    })
}

/// One Adam update from a computed batch step.
pub fn apply_step(
    params: &mut ModelParams,
    step: &BatchStep,
    adam: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let grads = step.grads.blocks();
    adam_step(&mut params.blocks_mut(), &grads, adam, lr)?;
    params.bn.running_mean = step.bn_next.running_mean;
    params.bn.running_var = step.bn_next.running_var;
    if !params.is_finite() {
        return Err(Error::Numeric("parameters became non-finite".into()));
    }
    Ok(())
}

pub fn adam_for(params: &ModelParams) -> AdamState {
    let lens: Vec<usize> = params.blocks().iter().map(|b| b.len()).collect();
    AdamState::new(&lens)
}

/// Trains from the seeded initialization and returns the parameters of
/// the best validation epoch together with the history.
pub fn train(
    cfg: &TrainConfig,
    store: &TripleStore,
    priori: &PrioriTable,
) -> Result<(ModelParams, TrainHistory)> {
    train_with(cfg, store, priori, &mut ())
}

pub fn train_with(
    cfg: &TrainConfig,
    store: &TripleStore,
    priori: &PrioriTable,
    observer: &mut dyn TrainObserver,
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if !store.is_augmented() {
        return Err(Error::State(
            "training needs a reciprocal-augmented store".into(),
        ));
    }
    if store.split(Split::Train).is_empty() {
        return Err(Error::Config("the train split is empty".into()));
    }
    let mc = &cfg.model;
    let n_e = store.n_entities();
    let mut params = ModelParams::init(mc, n_e, store.n_relations())?;
    let mut history = TrainHistory::default();
    if cfg.max_epochs == 0 {
        return Ok((params, history));
    }

    let targets = one_to_n_targets(store, Split::Train, mc.label_smoothing, n_e)?;
    let can_validate = !store.split(Split::Valid).is_empty();
    let mut adam = adam_for(&params);
    let mut streams = TrainStreams::new(mc.seed);
    let mut best = params.clone();
    let mut order: Vec<usize> = (0..targets.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.sort_unstable();
        RngStream::with_counter(mc.seed, STREAM_SHUFFLE, epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(mc.batch_size) {
            let batch: Vec<&OneToNTarget> = chunk.iter().map(|&i| &targets[i]).collect();
            let step = batch_gradients(&params, &batch, priori, mc, &mut streams)?;
            loss_sum += step.loss * batch.len() as f64;
            apply_step(&mut params, &step, &mut adam, mc.lr)?;
        }
        let eval_now = can_validate && (epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs);
        let valid_mrr = if eval_now {
            Some(evaluate(&params, store, priori, Split::Valid, mc)?.mrr)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / targets.len() as f64,
            valid_mrr,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        observer.on_epoch(&record)?;
        if history.push(record) {
            best.clone_from(&params);
            observer.on_new_best(epoch, &best)?;
        }
        if eval_now && early_stop(&history, cfg.patience) {
            break;
        }
    }
    if can_validate {
        Ok((best, history))
    } else {
        Ok((params, history))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::priori::build_priori;
    use crate::kgdata::store::Triple;

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            d_w: 4,
            d_h: 3,
            r_w: 2,
            r_h: 2,
            m: 4,
            k: 2,
            batch_size: 4,
            ..Default::default()
        }
    }

    fn tiny_store() -> TripleStore {
        let t = |h, r, t| Triple::new(h, r, t);
        let train = vec![
            t(0, 0, 1),
            t(1, 0, 2),
            t(2, 1, 3),
            t(3, 2, 4),
            t(4, 0, 5),
            t(5, 1, 6),
        ];
        let valid = vec![t(6, 0, 0), t(0, 1, 2)];
        let test = vec![t(1, 2, 3)];
        TripleStore::new(7, 3, train, valid, test)
            .unwrap()
            .augment_reciprocal()
            .unwrap()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let store = tiny_store();
        let priori = build_priori(&store, 2.0).unwrap();
        let cfg = TrainConfig {
            model: tiny_model(),
            max_epochs: 0,
            ..Default::default()
        };
        let (p, h) = train(&cfg, &store, &priori).unwrap();
        assert_eq!(p, ModelParams::init(&cfg.model, 7, 6).unwrap());
        assert!(h.records.is_empty());
    }

    #[test]
    fn empty_train_split_is_a_config_error() {
        let store = tiny_store().without_split(Split::Train);
        let priori = PrioriTable::empty(2.0).unwrap();
        let cfg = TrainConfig {
            model: tiny_model(),
            max_epochs: 1,
            ..Default::default()
        };
        assert!(matches!(
            train(&cfg, &store, &priori),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn same_seed_same_run() {
        let store = tiny_store();
        let priori = build_priori(&store, 2.0).unwrap();
        let cfg = TrainConfig {
            model: tiny_model(),
            max_epochs: 6,
            eval_every: 2,
            ..Default::default()
        };
        let (p1, h1) = train(&cfg, &store, &priori).unwrap();
        let (p2, h2) = train(&cfg, &store, &priori).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(h1.without_timing(), h2.without_timing());
        assert_eq!(h1.records.len(), 6);
        assert!(h1.records[1].valid_mrr.is_some() && h1.records[0].valid_mrr.is_none());
    }

    #[test]
    fn full_batch_loss_decreases_over_fifty_steps() {
        let store = tiny_store();
        let priori = build_priori(&store, 2.0).unwrap();
        let cfg = ModelConfig {
            dropout_in: 0.0,
            dropout_feat: 0.0,
            dropout_out: 0.0,
            lr: 0.01,
            ..tiny_model()
        };
        let targets = one_to_n_targets(&store, Split::Train, cfg.label_smoothing, 7).unwrap();
        let batch: Vec<&OneToNTarget> = targets.iter().collect();
        let mut params = ModelParams::init(&cfg, 7, 6).unwrap();
        let mut adam = adam_for(&params);
        let mut streams = TrainStreams::new(cfg.seed);
        let mut losses = Vec::new();
        for _ in 0..50 {
            let step = batch_gradients(&params, &batch, &priori, &cfg, &mut streams).unwrap();
            losses.push(step.loss);
            apply_step(&mut params, &step, &mut adam, cfg.lr).unwrap();
        }
        assert!(losses[49] < losses[0], "{} !< {}", losses[49], losses[0]);
    }

    #[test]
    fn tiny_step_descends() {
        let store = tiny_store();
        let priori = build_priori(&store, 2.0).unwrap();
        let mut passes = 0;
        for seed in 0..20 {
            let cfg = ModelConfig {
                dropout_in: 0.0,
                dropout_feat: 0.0,
                dropout_out: 0.0,
                seed,
                ..tiny_model()
            };
            let targets = one_to_n_targets(&store, Split::Train, cfg.label_smoothing, 7).unwrap();
            let batch: Vec<&OneToNTarget> = targets.iter().collect();
            let mut params = ModelParams::init(&cfg, 7, 6).unwrap();
            let mut streams = TrainStreams::new(seed);
            let before = batch_gradients(&params, &batch, &priori, &cfg, &mut streams).unwrap();
            // plain gradient step, small enough for the first-order regime
            for (p, g) in params.blocks_mut().into_iter().zip(before.grads.blocks()) {
                p.iter_mut().zip(g).for_each(|(p, g)| *p -= 1e-4 * g);
            }
            let after = batch_gradients(&params, &batch, &priori, &cfg, &mut streams).unwrap();
            if after.loss < before.loss {
                passes += 1;
            }
        }
        assert!(passes >= 19, "{passes}/20");
    }
}
