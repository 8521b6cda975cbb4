//! Training-run settings and named hyperparameter overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub max_epochs: usize,
    /// Evaluations without strict improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    /// Search grid: hyperparameter name to candidate values.
    pub grid: BTreeMap<String, Vec<f64>>,
    pub random_search_draws: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let mut grid = BTreeMap::new();
        grid.insert(
            "embedding_dim".to_owned(),
            vec![100.0, 150.0, 200.0, 250.0, 300.0],
        );
        grid.insert("lambda".to_owned(), vec![0.1, 0.2, 0.3, 0.4]);
        Self {
            model: ModelConfig::default(),
            max_epochs: 200,
            patience: 5,
            eval_every: 5,
            grid,
            random_search_draws: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate_grid(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("search grid is empty".into()));
        }
        for (k, v) in &self.grid {
            if v.is_empty() {
                return Err(Error::Config(format!("grid entry `{k}` has no values")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!(
                    "grid entry `{k}` has a non-finite value"
                )));
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        crate::model::config::config_hash(self)
    }
}

/// Splits an embedding width into the most square `d_w × d_h` plane with
/// `d_w ≤ d_h` (300 → 15×20, 100 → 10×10).
pub fn factor_plane(d_e: usize) -> Result<(usize, usize)> {
    if d_e == 0 {
        return Err(Error::Config("embedding_dim must be positive".into()));
    }
    let mut d_w = 1;
    let mut i = 1;
    while i * i <= d_e {
        if d_e.is_multiple_of(i) {
            d_w = i;
        }
        i += 1;
    }
    Ok((d_w, d_e / d_w))
}

/// Returns `cfg` with one named hyperparameter set.
///
/// `embedding_dim` reshapes the entity plane via [`factor_plane`];
/// `kernel_size` sets `r_w = r_h`. Any other key must name a numeric
/// [`ModelConfig`] field; integer fields require an integral value.
pub fn apply_hyper(cfg: &ModelConfig, key: &str, value: f64) -> Result<ModelConfig> {
    let integral = |v: f64| -> Result<usize> {
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            Err(Error::Config(format!(
                "`{key}` needs a non-negative integer, got {v}"
            )))
        } else {
            Ok(v as usize)
        }
    };
    let mut out = cfg.clone();
    match key {
        "embedding_dim" => {
            let (w, h) = factor_plane(integral(value)?)?;
            out.d_w = w;
            out.d_h = h;
        }
        "kernel_size" => {
            let s = integral(value)?;
            out.r_w = s;
            out.r_h = s;
        }
        _ => {
            let mut obj = serde_json::to_value(cfg)?;
            let slot = obj
                .get_mut(key)
                .ok_or_else(|| Error::Config(format!("unknown hyperparameter `{key}`")))?;
            *slot = match slot {
                serde_json::Value::Number(n) if n.is_u64() => integral(value)?.into(),
                serde_json::Value::Number(_) => value.into(),
                _ => {
                    return Err(Error::Config(format!(
                        "hyperparameter `{key}` is not numeric"
                    )));
                }
            };
            out = serde_json::from_value(obj)?;
        }
    }
    Ok(out)
}
