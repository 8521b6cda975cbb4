//! The flat JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::config::AblationMode;
use crate::model::gradcheck::BnCheckMode;
use crate::training::config::TrainConfig;

pub const SEED_ENV: &str = "CONVD_SEED";

/// Every key a config file may contain. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub train_path: Option<PathBuf>,
    pub valid_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Split evaluated by `eval`.
    pub split: String,
    pub top_k: usize,
    pub modes: Vec<AblationMode>,
    /// Seeds for `ablate` and `sweep`; empty means just `seed`.
    pub seeds: Vec<u64>,
    /// Swept hyperparameter; `kernel_fraction` uses the fraction runner.
    pub sweep_param: String,
    pub sweep_values: Vec<f64>,
    pub gradcheck_entities: usize,
    pub gradcheck_relations: usize,
    pub gradcheck_queries: usize,
    pub gradcheck_bn: BnCheckMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            train_path: None,
            valid_path: None,
            test_path: None,
            output_dir: PathBuf::from("convd-out"),
            split: "test".into(),
            top_k: 10,
            modes: AblationMode::ALL.to_vec(),
            seeds: Vec::new(),
            sweep_param: "kernel_fraction".into(),
            sweep_values: vec![0.25, 0.5, 1.0],
            gradcheck_entities: 7,
            gradcheck_relations: 3,
            gradcheck_queries: 3,
            gradcheck_bn: BnCheckMode::Frozen,
        }
    }
}

fn known_keys() -> Vec<String> {
    match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Parses one `key=value` override; the value is read as JSON when it
/// parses, otherwise as a string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned()));
    Ok((k.trim().to_owned(), value))
}

impl RunConfig {
    /// Defaults, then the file, then `overrides`, then `CONVD_SEED`.
    pub fn resolve(
        file: Option<&Path>,
        overrides: &[(String, Value)],
        env_seed: Option<&str>,
    ) -> Result<Self> {
        let mut obj: Map<String, Value> = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                match serde_json::from_str(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => {
                        return Err(Error::Config(format!(
                            "{} must hold a JSON object",
                            p.display()
                        )))
                    }
                    Err(e) => return Err(Error::Config(format!("{}: {e}", p.display()))),
                }
            }
            None => Map::new(),
        };
        for (k, v) in overrides {
            obj.insert(k.clone(), v.clone());
        }
        if let Some(s) = env_seed {
            let seed: u64 = s.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))
            })?;
            obj.insert("seed".into(), seed.into());
        }
        let known = known_keys();
        let mut unknown: Vec<&String> = obj.keys().filter(|k| !known.contains(k)).collect();
        unknown.sort();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown config key(s): {unknown:?}")));
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(obj))
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.train.model.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn data_paths(&self) -> Result<[&Path; 3]> {
        match (&self.train_path, &self.valid_path, &self.test_path) {
            (Some(a), Some(b), Some(c)) => Ok([a, b, c]),
            _ => Err(Error::Config(
                "train_path, valid_path and test_path must all be set".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(None, &[], None).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let o = vec![("learning_rate".to_owned(), Value::from(0.1))];
        let e = RunConfig::resolve(None, &o, None).unwrap_err().to_string();
        assert!(e.contains("learning_rate"), "{e}");
    }

    #[test]
    fn overrides_and_env_seed() {
        let o = vec![
            parse_override("lr=0.01").unwrap(),
            parse_override("split=valid").unwrap(),
        ];
        let c = RunConfig::resolve(None, &o, Some("42")).unwrap();
        assert_eq!(c.train.model.lr, 0.01);
        assert_eq!(c.split, "valid");
        assert_eq!(c.train.model.seed, 42);
        assert!(RunConfig::resolve(None, &[], Some("x")).is_err());
    }

    #[test]
    fn constraint_violations_are_config_errors() {
        let o = vec![parse_override("m=3").unwrap()];
        let e = RunConfig::resolve(None, &o, None).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("perfect square"));
    }
}
