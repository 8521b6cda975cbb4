//! Model hyperparameters and their structural constraints.

use serde::{Deserialize, Serialize};

use crate::attention::perfect_square_root;
use crate::error::{Error, Result};

/// Architecture, regularization and optimizer settings for one model.
///
/// `d_e = d_w·d_h` and `d_r = m·r_w·r_h` are derived, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_w: usize,
    pub d_h: usize,
    pub r_w: usize,
    pub r_h: usize,
    /// Kernel count; must be a perfect square.
    pub m: usize,
    /// Attention projection width, also the `d_k` scaling.
    pub k: usize,
    /// Priori weight λ.
    pub lambda: f64,
    /// Logarithm base of the priori table.
    pub priori_base: f64,
    pub dropout_in: f64,
    pub dropout_feat: f64,
    pub dropout_out: f64,
    pub label_smoothing: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Ablation: include the priori logit bias.
    pub use_priori: bool,
    /// Ablation: learned attention weights instead of an equal-weight sum.
    pub use_attention: bool,
    /// Fraction of kernels kept active (lowest indices first).
    pub kernel_fraction: f64,
    /// Apply the sigmoid before the entity dot product (inspection only).
    pub sigmoid_pre_dot: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_w: 10,
            d_h: 10,
            r_w: 3,
            r_h: 3,
            m: 9,
            k: 32,
            lambda: 0.1,
            priori_base: 2.0,
            dropout_in: 0.2,
            dropout_feat: 0.2,
            dropout_out: 0.3,
            label_smoothing: 0.1,
            lr: 0.003,
            batch_size: 128,
            seed: 1,
            use_priori: true,
            use_attention: true,
            kernel_fraction: 1.0,
            sigmoid_pre_dot: false,
        }
    }
}

/// The ablation variants compared by the ablation runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    NoPriori,
    NoAttention,
    NoBoth,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::Full,
        AblationMode::NoPriori,
        AblationMode::NoAttention,
        AblationMode::NoBoth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoPriori => "no_priori",
            AblationMode::NoAttention => "no_attention",
            AblationMode::NoBoth => "no_both",
        }
    }

    pub fn apply(self, cfg: &ModelConfig) -> ModelConfig {
        let mut c = cfg.clone();
        c.use_priori = matches!(self, AblationMode::Full | AblationMode::NoAttention);
        c.use_attention = matches!(self, AblationMode::Full | AblationMode::NoPriori);
        c
    }
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation mode `{s}`")))
    }
}

impl ModelConfig {
    pub fn d_e(&self) -> usize {
        self.d_w * self.d_h
    }

    pub fn d_r(&self) -> usize {
        self.m * self.r_w * self.r_h
    }

    pub fn kernel_len(&self) -> usize {
        self.r_w * self.r_h
    }

    /// Shape of one convolution output map.
    pub fn conv_shape(&self) -> (usize, usize) {
        (self.d_w + 1 - self.r_w, self.d_h + 1 - self.r_h)
    }

    pub fn conv_map(&self) -> usize {
        let (a, b) = self.conv_shape();
        a * b
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d_w == 0 || self.d_h == 0 || self.r_w == 0 || self.r_h == 0 || self.k == 0 {
            return fail("d_w, d_h, r_w, r_h and k must be positive".into());
        }
        if perfect_square_root(self.m).is_none() {
            return fail(format!(
                "m = {} is not a perfect square: the kernel count must be the square of a positive integer",
                self.m
            ));
        }
        if self.r_w > self.d_w || self.r_h > self.d_h {
            return fail(format!(
                "kernel {}x{} larger than entity plane {}x{}",
                self.r_w, self.r_h, self.d_w, self.d_h
            ));
        }
        for (name, p) in [
            ("dropout_in", self.dropout_in),
            ("dropout_feat", self.dropout_feat),
            ("dropout_out", self.dropout_out),
            ("label_smoothing", self.label_smoothing),
        ] {
            if !(0.0..1.0).contains(&p) {
                return fail(format!("{name} = {p} must lie in [0, 1)"));
            }
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("lr = {} must be > 0", self.lr));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return fail(format!("lambda = {} must be >= 0", self.lambda));
        }
        if !(self.priori_base > 1.0) || !self.priori_base.is_finite() {
            return fail(format!("priori_base = {} must be > 1", self.priori_base));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(self.kernel_fraction > 0.0 && self.kernel_fraction <= 1.0) {
            return fail(format!(
                "kernel_fraction = {} must lie in (0, 1]",
                self.kernel_fraction
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Stable 16-hex-digit hash of any serializable configuration.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    // serde_json::Value maps are sorted, which makes the bytes canonical
    let canonical = serde_json::to_value(value)
        .and_then(|v| serde_json::to_vec(&v))
        .unwrap_or_default();
    hex::encode(&Sha256::digest(&canonical)[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.d_e(), c.d_r(), c.conv_map()), (100, 81, 64));
        assert_eq!((c.batch_size, c.lr, c.label_smoothing), (128, 0.003, 0.1));
    }

    #[test]
    fn non_square_kernel_count_is_rejected() {
        let c = ModelConfig {
            m: 3,
            ..Default::default()
        };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("perfect square"), "{msg}");
    }

    #[test]
    fn other_constraints() {
        let bad = [
            ModelConfig {
                r_w: 11,
                ..Default::default()
            },
            ModelConfig {
                dropout_out: 1.0,
                ..Default::default()
            },
            ModelConfig {
                lr: 0.0,
                ..Default::default()
            },
            ModelConfig {
                priori_base: 1.0,
                ..Default::default()
            },
            ModelConfig {
                kernel_fraction: 0.0,
                ..Default::default()
            },
            ModelConfig {
                label_smoothing: -0.1,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn ablation_modes_toggle_flags() {
        let c = ModelConfig::default();
        let nb = AblationMode::NoBoth.apply(&c);
        assert!(!nb.use_priori && !nb.use_attention);
        let np = AblationMode::NoPriori.apply(&c);
        assert!(!np.use_priori && np.use_attention);
        assert_eq!(AblationMode::Full.apply(&c), c);
        assert_eq!(
            "no_attention".parse::<AblationMode>().unwrap(),
            AblationMode::NoAttention
        );
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ModelConfig::default();
        assert_eq!(a.hash(), ModelConfig::default().hash());
        let b = ModelConfig {
            lambda: 0.2,
            ..Default::default()
        };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
