//! The `convd` command line.
//!
//! Every command reads a flat JSON config (`--config`), applies `--set
//! key=value` overrides and `CONVD_SEED`, prints one JSON document on
//! standard output and writes its artifacts atomically under
//! `output_dir`. Exit codes: 0 success, 2 configuration, 3 data,
//! 4 numeric, 5 checkpoint, 6 gradient check failure, 1 anything else.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::error::Error;

pub use config::{parse_override, RunConfig, SEED_ENV};

pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const CHECKPOINT: i32 = 5;
    pub const GRADCHECK: i32 = 6;
}

/// Exit code for a library error raised outside a more specific context.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidProbability(_)
        | Error::InvalidBase(_)
        | Error::InvalidFraction(_)
        | Error::Json(_) => exit::CONFIG,
        Error::Parse { .. }
        | Error::Vocabulary { .. }
        | Error::Index { .. }
        | Error::Generation(_)
        | Error::Io { .. } => exit::DATA,
        Error::Numeric(_) | Error::DegenerateBatch(_) => exit::NUMERIC,
        Error::Checkpoint(_) => exit::CHECKPOINT,
        Error::Dimension(_) | Error::State(_) => exit::INTERNAL,
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    /// Document to print despite the failure (gradient check table).
    pub output: Option<Value>,
}

impl CliError {
    pub fn new(code: i32, message: String) -> Self {
        Self {
            code,
            message,
            output: None,
        }
    }

    pub fn with_output(mut self, v: Value) -> Self {
        self.output = Some(v);
        self
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(exit_code(&e), e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "convd",
    version,
    about = "Dynamic-convolution knowledge graph embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Flat JSON config file; defaults apply to missing keys.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set lr=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (same as `--set output_dir=...`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Indent the JSON printed on standard output.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes resolved-config.json, metrics.jsonl, best.ckpt, report.json.
    Train(Common),
    /// Evaluate a checkpoint on the configured split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split to evaluate (train, valid, test); overrides the config.
        #[arg(long)]
        split: Option<String>,
    },
    /// Rank tail candidates for one (head, relation) query.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        head: String,
        /// Relation name; append `^-1` for the reciprocal direction.
        #[arg(long)]
        relation: String,
        #[arg(long)]
        top_k: Option<usize>,
        /// Drop tails already known from the train split (needs data paths).
        #[arg(long)]
        filter_known: bool,
    },
    /// Compare analytic and finite-difference gradients block by block.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_backward: Option<String>,
    },
    /// Train every ablation mode and tabulate test metrics.
    Ablate(Common),
    /// Sweep one hyperparameter (kernel_fraction by default).
    Sweep(Common),
    /// Grid search plus random refinement around the grid winner.
    Search(Common),
    /// Write a synthetic permutation graph as train/valid/test TSV files.
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long, default_value_t = 4)]
        relations: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long)]
        pretty: bool,
    },
}

fn resolve(common: &Common, extra: &[(String, Value)]) -> Result<RunConfig, CliError> {
    let mut overrides = Vec::new();
    for s in &common.overrides {
        overrides.push(parse_override(s).map_err(CliError::from)?);
    }
    if let Some(out) = &common.out {
        overrides.push((
            "output_dir".into(),
            Value::String(out.display().to_string()),
        ));
    }
    overrides.extend_from_slice(extra);
    let env_seed = std::env::var(SEED_ENV).ok();
    RunConfig::resolve(common.config.as_deref(), &overrides, env_seed.as_deref())
        .map_err(|e| CliError::new(exit::CONFIG, e.to_string()))
}

fn dispatch(cli: &Cli) -> (bool, Result<Value, CliError>) {
    match &cli.command {
        Command::Train(c) => (
            c.pretty,
            resolve(c, &[]).and_then(|cfg| commands::train(&cfg)),
        ),
        Command::Eval {
            common,
            checkpoint,
            split,
        } => {
            let extra: Vec<(String, Value)> = split
                .iter()
                .map(|s| ("split".to_owned(), Value::String(s.clone())))
                .collect();
            (
                common.pretty,
                resolve(common, &extra).and_then(|cfg| commands::eval(&cfg, checkpoint)),
            )
        }
        Command::Predict {
            common,
            checkpoint,
            head,
            relation,
            top_k,
            filter_known,
        } => {
            let extra: Vec<(String, Value)> = top_k
                .iter()
                .map(|k| ("top_k".to_owned(), Value::from(*k)))
                .collect();
            (
                common.pretty,
                resolve(common, &extra).and_then(|cfg| {
                    commands::predict(&cfg, checkpoint, head, relation, *filter_known)
                }),
            )
        }
        Command::Gradcheck {
            common,
            corrupt_backward,
        } => (
            common.pretty,
            resolve(common, &[])
                .and_then(|cfg| commands::gradcheck_cmd(&cfg, corrupt_backward.as_deref())),
        ),
        Command::Ablate(c) => (
            c.pretty,
            resolve(c, &[]).and_then(|cfg| commands::ablate(&cfg)),
        ),
        Command::Sweep(c) => (
            c.pretty,
            resolve(c, &[]).and_then(|cfg| commands::sweep(&cfg)),
        ),
        Command::Search(c) => (
            c.pretty,
            resolve(c, &[]).and_then(|cfg| commands::search(&cfg)),
        ),
        Command::GenToy {
            out,
            seed,
            entities,
            relations,
            depth,
            pretty,
        } => (
            *pretty,
            commands::gen_toy(out, *seed, *entities, *relations, *depth),
        ),
    }
}

fn print(v: &Value, pretty: bool) {
    match output::to_json(v, pretty) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("convd: {e}"),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let (pretty, result) = dispatch(cli);
    match result {
        Ok(v) => {
            print(&v, pretty);
            exit::OK
        }
        Err(e) => {
            if let Some(v) = &e.output {
                print(v, pretty);
            }
            eprintln!("convd: {}", e.message);
            e.code
        }
    }
}
