//! Subcommand implementations. Each returns the JSON document it printed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate, run_ablation, run_fraction_sweep, run_param_sweep, MetricsReport,
};
use crate::kgdata::priori::{build_priori, PrioriTable};
use crate::kgdata::store::{
    dataset_fingerprint, load_dataset, load_triples, to_tsv, Split, TripleStore, RECIPROCAL_SUFFIX,
};
use crate::kgdata::toy::generate_toy_kg;
use crate::kgdata::vocab::Vocab;
use crate::model::checkpoint::Checkpoint;
use crate::model::count_parameters;
use crate::model::forward::{forward_score, Mode};
use crate::model::gradcheck::{gradcheck, GradcheckProblem};
use crate::model::params::{ModelParams, BLOCK_NAMES};
use crate::training::history::EpochRecord;
use crate::training::search::hyper_search;
use crate::training::train::{train_with, TrainObserver};

use super::config::RunConfig;
use super::output::{write_atomic, write_json};
use super::{exit, CliError};

type CmdResult = std::result::Result<Value, CliError>;

fn with_code(code: i32) -> impl Fn(Error) -> CliError {
    move |e| CliError::new(code, e.to_string())
}

/// Augmented store, priori table and fingerprint of the configured data.
struct LoadedData {
    vocab: Vocab,
    store: TripleStore,
    priori: PrioriTable,
    fingerprint: String,
}

fn load_data(cfg: &RunConfig, vocab: Option<&Vocab>) -> std::result::Result<LoadedData, CliError> {
    let paths = cfg.data_paths().map_err(with_code(exit::CONFIG))?;
    let data_err = with_code(exit::DATA);
    let (vocab, store) = match vocab {
        None => {
            let ds = load_dataset(paths[0], paths[1], paths[2]).map_err(&data_err)?;
            (ds.vocab, ds.store)
        }
        Some(v) => {
            let (_, tr) = load_triples(paths[0], Some(v.clone())).map_err(&data_err)?;
            let (_, va) = load_triples(paths[1], Some(v.clone())).map_err(&data_err)?;
            let (_, te) = load_triples(paths[2], Some(v.clone())).map_err(&data_err)?;
            let store =
                TripleStore::new(v.n_entities(), v.n_relations(), tr, va, te).map_err(&data_err)?;
            (v.clone(), store)
        }
    };
    let store = store.augment_reciprocal().map_err(&data_err)?;
    let priori =
        build_priori(&store, cfg.train.model.priori_base).map_err(with_code(exit::CONFIG))?;
    let fingerprint = dataset_fingerprint(paths).map_err(&data_err)?;
    Ok(LoadedData {
        vocab,
        store,
        priori,
        fingerprint,
    })
}

fn parse_split(name: &str) -> std::result::Result<Split, CliError> {
    name.parse::<Split>().map_err(with_code(exit::CONFIG))
}

fn require_nonempty(store: &TripleStore, split: Split) -> std::result::Result<(), CliError> {
    if store.split(split).is_empty() {
        return Err(CliError::new(
            exit::DATA,
            format!("the {} split is empty", split.name()),
        ));
    }
    Ok(())
}

fn emit<T: Serialize>(out: &Path, name: &str, value: &T) -> CmdResult {
    write_json(&out.join(name), value).map_err(CliError::from)?;
    serde_json::to_value(value).map_err(|e| CliError::from(Error::from(e)))
}

struct ArtifactWriter {
    dir: PathBuf,
    config_hash: String,
    metrics: String,
    timings: String,
    checkpoint: Checkpoint,
}

impl TrainObserver for ArtifactWriter {
    fn on_epoch(&mut self, r: &EpochRecord) -> Result<()> {
        let line = json!({
            "epoch": r.epoch,
            "loss": r.train_loss,
            "valid_mrr": r.valid_mrr,
            "config_hash": self.config_hash,
        });
        self.metrics.push_str(&line.to_string());
        self.metrics.push('\n');
        self.timings
            .push_str(&json!({"epoch": r.epoch, "wall_ms": r.wall_ms}).to_string());
        self.timings.push('\n');
        write_atomic(&self.dir.join("metrics.jsonl"), self.metrics.as_bytes())?;
        write_atomic(&self.dir.join("timings.jsonl"), self.timings.as_bytes())
    }

    fn on_new_best(&mut self, _epoch: usize, params: &ModelParams) -> Result<()> {
        self.checkpoint.params.clone_from(params);
        write_atomic(&self.dir.join("best.ckpt"), &self.checkpoint.to_bytes()?)
    }
}

pub fn train(cfg: &RunConfig) -> CmdResult {
    let started = Instant::now();
    let data = load_data(cfg, None)?;
    let out = &cfg.output_dir;
    write_json(&out.join("resolved-config.json"), cfg)?;
    let tc = &cfg.train;
    let mut writer = ArtifactWriter {
        dir: out.clone(),
        config_hash: tc.hash(),
        metrics: String::new(),
        timings: String::new(),
        checkpoint: Checkpoint {
            config: tc.model.clone(),
            vocab: data.vocab.clone(),
            base_relations: data.vocab.n_relations(),
            params: ModelParams::init(&tc.model, 0, 0)?,
            priori: data.priori.clone(),
        },
    };
    write_atomic(&out.join("metrics.jsonl"), b"")?;
    write_atomic(&out.join("timings.jsonl"), b"")?;
    let (params, history) = train_with(tc, &data.store, &data.priori, &mut writer)?;
    writer.on_new_best(0, &params)?;

    let mut metrics = serde_json::Map::new();
    for split in Split::ALL {
        if !data.store.split(split).is_empty() {
            let m = evaluate(&params, &data.store, &data.priori, split, &tc.model)?;
            metrics.insert(
                split.name().to_owned(),
                serde_json::to_value(m).map_err(Error::from)?,
            );
        }
    }
    let n_params = count_parameters(
        &tc.model,
        data.store.n_entities(),
        data.store.n_relations(),
        false,
    )?;
    let report = json!({
        "command": "train",
        "config_hash": tc.hash(),
        "dataset_fingerprint": data.fingerprint,
        "n_params": n_params.convd,
        "epochs_run": history.records.len(),
        "best_epoch": history.best_epoch,
        "best_valid_mrr": history.best_valid_mrr,
        "metrics": metrics,
        "timing": {"wall_ms": started.elapsed().as_millis() as u64},
    });
    emit(out, "report.json", &report)
}

fn load_checkpoint(path: &Path) -> std::result::Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(with_code(exit::CHECKPOINT))
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> CmdResult {
    let started = Instant::now();
    let split = parse_split(&cfg.split)?;
    let ckpt = load_checkpoint(checkpoint)?;
    let data = load_data(cfg, Some(&ckpt.vocab))?;
    if data.store.n_relations() != ckpt.params.n_relations() {
        return Err(CliError::new(
            exit::CHECKPOINT,
            "checkpoint relation table does not match the dataset".into(),
        ));
    }
    require_nonempty(&data.store, split)?;
    let metrics: MetricsReport =
        evaluate(&ckpt.params, &data.store, &ckpt.priori, split, &ckpt.config)?;
    let report = json!({
        "command": "eval",
        "split": split.name(),
        "model_config_hash": ckpt.config.hash(),
        "dataset_fingerprint": data.fingerprint,
        "mrr": metrics.mrr,
        "hits": metrics.hits,
        "n_queries": metrics.n_queries,
        "tail": metrics.tail,
        "head": metrics.head,
        "timing": {"wall_ms": started.elapsed().as_millis() as u64},
    });
    emit(&cfg.output_dir, "report.json", &report)
}

fn unknown_symbol(kind: &str, symbol: &str, candidates: Vec<&str>) -> CliError {
    CliError::new(
        exit::DATA,
        format!(
            "unknown {kind} `{symbol}`; nearest: {}",
            candidates.join(", ")
        ),
    )
}

pub fn predict(
    cfg: &RunConfig,
    checkpoint: &Path,
    head: &str,
    relation: &str,
    filter_known: bool,
) -> CmdResult {
    let ckpt = load_checkpoint(checkpoint)?;
    let vocab = &ckpt.vocab;
    let h = vocab
        .entities
        .id(head)
        .ok_or_else(|| unknown_symbol("entity", head, vocab.entities.nearest(head, 3)))?;
    let r = match relation.strip_suffix(RECIPROCAL_SUFFIX) {
        Some(base) if vocab.relations.id(base).is_some() => {
            vocab.relations.id(base).unwrap_or_default() + ckpt.base_relations
        }
        _ => vocab.relations.id(relation).ok_or_else(|| {
            unknown_symbol("relation", relation, vocab.relations.nearest(relation, 3))
        })?,
    };
    let (scores, _) = forward_score(h, r, &ckpt.params, &ckpt.priori, &ckpt.config, Mode::Eval)?;
    let known: Vec<usize> = if filter_known {
        let data = load_data(cfg, Some(vocab))?;
        data.store
            .split(Split::Train)
            .iter()
            .filter(|t| t.head == h && t.relation == r)
            .map(|t| t.tail)
            .collect()
    } else {
        Vec::new()
    };
    let mut order: Vec<usize> = (0..scores.len()).filter(|e| !known.contains(e)).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let predictions: Vec<Value> = order
        .iter()
        .take(cfg.top_k)
        .enumerate()
        .map(|(i, &e)| {
            json!({
                "rank": i + 1,
                "entity": vocab.entities.symbol(e).unwrap_or_default(),
                "score": scores[e],
            })
        })
        .collect();
    Ok(json!({
        "head": head,
        "relation": relation,
        "filtered_known": known.len(),
        "predictions": predictions,
    }))
}

pub fn gradcheck_cmd(cfg: &RunConfig, corrupt: Option<&str>) -> CmdResult {
    let corrupt_block = match corrupt {
        None => None,
        Some(name) => Some(BLOCK_NAMES.iter().position(|b| *b == name).ok_or_else(|| {
            CliError::new(exit::CONFIG, format!("no parameter block named `{name}`"))
        })?),
    };
    let problem = GradcheckProblem::random(
        &cfg.train.model,
        cfg.gradcheck_entities,
        cfg.gradcheck_relations,
        cfg.gradcheck_queries,
    )?;
    let report = gradcheck(&problem, cfg.gradcheck_bn, corrupt_block)?;
    let value = emit(&cfg.output_dir, "gradcheck.json", &report)?;
    if !report.passed {
        let failed: Vec<String> = report
            .blocks
            .iter()
            .filter(|b| !b.passed)
            .map(|b| format!("{} ({:.3e})", b.block, b.max_rel_error))
            .collect();
        return Err(CliError::new(
            exit::GRADCHECK,
            format!("gradient check failed for: {}", failed.join(", ")),
        )
        .with_output(value));
    }
    Ok(value)
}

pub fn ablate(cfg: &RunConfig) -> CmdResult {
    let data = load_data(cfg, None)?;
    require_nonempty(&data.store, Split::Test)?;
    let table = run_ablation(
        &cfg.train,
        &data.store,
        &data.priori,
        &cfg.modes,
        &cfg.seeds(),
    )?;
    let doc = json!({
        "command": "ablate",
        "config_hash": cfg.train.hash(),
        "dataset_fingerprint": data.fingerprint,
        "seeds": cfg.seeds(),
        "rows": table.rows,
        "full_beats_no_both": table.full_beats_no_both,
    });
    emit(&cfg.output_dir, "ablation.json", &doc)
}

pub fn sweep(cfg: &RunConfig) -> CmdResult {
    let data = load_data(cfg, None)?;
    require_nonempty(&data.store, Split::Test)?;
    let seeds = cfg.seeds();
    let rows = if cfg.sweep_param == "kernel_fraction" {
        serde_json::to_value(run_fraction_sweep(
            &cfg.train,
            &data.store,
            &data.priori,
            &cfg.sweep_values,
            &seeds,
        )?)
    } else {
        serde_json::to_value(run_param_sweep(
            &cfg.train,
            &data.store,
            &data.priori,
            &cfg.sweep_param,
            &cfg.sweep_values,
            &seeds,
        )?)
    }
    .map_err(Error::from)?;
    let doc = json!({
        "command": "sweep",
        "parameter": cfg.sweep_param,
        "config_hash": cfg.train.hash(),
        "dataset_fingerprint": data.fingerprint,
        "seeds": seeds,
        "rows": rows,
    });
    emit(&cfg.output_dir, "sweep.json", &doc)
}

pub fn search(cfg: &RunConfig) -> CmdResult {
    let data = load_data(cfg, None)?;
    let result = hyper_search(&cfg.train, &data.store, &data.priori)?;
    let doc = json!({
        "command": "search",
        "dataset_fingerprint": data.fingerprint,
        "best_config_hash": result.best.hash(),
        "best": result.best,
        "leaderboard": result.leaderboard,
    });
    emit(&cfg.output_dir, "search.json", &doc)
}

pub fn gen_toy(
    out: &Path,
    seed: u64,
    entities: usize,
    relations: usize,
    depth: usize,
) -> CmdResult {
    let ds = generate_toy_kg(seed, entities, relations, depth).map_err(with_code(exit::CONFIG))?;
    let mut files = serde_json::Map::new();
    for (split, name) in [
        (Split::Train, "train.txt"),
        (Split::Valid, "valid.txt"),
        (Split::Test, "test.txt"),
    ] {
        let path = out.join(name);
        write_atomic(&path, to_tsv(ds.store.split(split), &ds.vocab).as_bytes())?;
        files.insert(
            split.name().to_owned(),
            json!({
                "path": path,
                "triples": ds.store.split(split).len(),
            }),
        );
    }
    Ok(json!({
        "command": "gen-toy",
        "seed": seed,
        "entities": entities,
        "relations": relations,
        "composition_depth": depth,
        "files": files,
    }))
}
