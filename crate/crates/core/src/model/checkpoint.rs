//! Checkpoint files.
//!
//! Layout: one UTF-8 JSON header line, a single `\n`, then the raw
//! little-endian `f64` arrays concatenated in manifest order. The header
//! holds the format version, the model config, the vocabulary, and a
//! manifest of `(name, rows, cols, offset)` with byte offsets relative to
//! the start of the array section.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgdata::priori::PrioriTable;
use crate::kgdata::vocab::Vocab;
use crate::numerics::tensor::Tensor2;

use super::config::ModelConfig;
use super::params::{ModelParams, BLOCK_NAMES};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab: Vocab,
    /// Relation count before reciprocal augmentation.
    pub base_relations: usize,
    pub arrays: Vec<ArrayEntry>,
}

/// Everything needed to score queries without the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub base_relations: usize,
    pub params: ModelParams,
    pub priori: PrioriTable,
}

fn learned_shapes(p: &ModelParams) -> Vec<(usize, usize)> {
    vec![
        p.ent.shape(),
        p.rel.shape(),
        p.attn.query_proj.shape(),
        p.attn.key_proj.shape(),
        p.attn.value_proj.shape(),
        p.attn.priori_mod.shape(),
        p.fc_w.shape(),
        p.fc_b.shape(),
        p.out_w.shape(),
        p.out_b.shape(),
        (1, 1),
        (1, 1),
    ]
}

impl Checkpoint {
    fn arrays(&self) -> Vec<(String, Tensor2)> {
        let mut out: Vec<(String, Tensor2)> = BLOCK_NAMES
            .iter()
            .zip(learned_shapes(&self.params))
            .zip(self.params.blocks())
            .map(|((name, (r, c)), data)| {
                (
                    name.to_string(),
                    Tensor2::from_vec(r, c, data.to_vec()).expect("shape"),
                )
            })
            .collect();
        out.push((
            "bn.running".into(),
            Tensor2::row_vector(vec![
                self.params.bn.running_mean,
                self.params.bn.running_var,
            ]),
        ));
        let counts: Vec<f64> = self
            .priori
            .counts()
            .iter()
            .flat_map(|(&(e, r), &c)| [e as f64, r as f64, c as f64])
            .collect();
        out.push((
            "priori.counts".into(),
            Tensor2::from_vec(self.priori.counts().len(), 3, counts).expect("shape"),
        ));
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let arrays = self.arrays();
        let mut manifest = Vec::with_capacity(arrays.len());
        let mut offset = 0u64;
        for (name, t) in &arrays {
            manifest.push(ArrayEntry {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
                offset,
            });
            offset += 8 * t.len() as u64;
        }
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            base_relations: self.base_relations,
            arrays: manifest,
        };
        let mut bytes = serde_json::to_vec(&header)?;
        bytes.push(b'\n');
        for (_, t) in &arrays {
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_owned());
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("missing header terminator"))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let body = &bytes[nl + 1..];
        let mut expected_offset = 0u64;
        let mut tensors = Vec::with_capacity(header.arrays.len());
        for a in &header.arrays {
            if a.offset != expected_offset {
                return Err(bad("array offsets are not contiguous"));
            }
            let n = a
                .rows
                .checked_mul(a.cols)
                .ok_or_else(|| bad("array too large"))?;
            let start = a.offset as usize;
            let end = start + 8 * n;
            if end > body.len() {
                return Err(Error::Checkpoint(format!(
                    "truncated: array `{}` needs bytes {start}..{end}, file has {}",
                    a.name,
                    body.len()
                )));
            }
            let data = body[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push((a.name.as_str(), Tensor2::from_vec(a.rows, a.cols, data)?));
            expected_offset = end as u64;
        }
        if expected_offset as usize != body.len() {
            return Err(bad("trailing bytes after the last array"));
        }
        let names: Vec<&str> = tensors.iter().map(|(n, _)| *n).collect();
        let mut want: Vec<&str> = BLOCK_NAMES.to_vec();
        want.extend(["bn.running", "priori.counts"]);
        if names != want {
            return Err(Error::Checkpoint(format!(
                "unexpected array manifest {names:?}"
            )));
        }

        let cfg = header.config;
        cfg.validate()
            .map_err(|e| Error::Checkpoint(format!("stored config invalid: {e}")))?;
        let (n_e, n_r) = (tensors[0].1.rows(), tensors[1].1.rows());
        let mut params = ModelParams::init(&cfg, n_e, n_r)?;
        if learned_shapes(&params)
            .iter()
            .zip(&tensors)
            .any(|(s, (_, t))| *s != t.shape())
        {
            return Err(bad("array shapes do not match the stored config"));
        }
        let blocks: Vec<Vec<f64>> = tensors[..BLOCK_NAMES.len()]
            .iter()
            .map(|(_, t)| t.data().to_vec())
            .collect();
        params.set_blocks(&blocks)?;
        let running = &tensors[BLOCK_NAMES.len()].1;
        if running.len() != 2 {
            return Err(bad("bn.running must hold mean and variance"));
        }
        params.bn.running_mean = running.data()[0];
        params.bn.running_var = running.data()[1];
        params.attn.lambda = cfg.lambda;

        let counts = &tensors[BLOCK_NAMES.len() + 1].1;
        if counts.cols() != 3 && !counts.is_empty() {
            return Err(bad("priori.counts must have 3 columns"));
        }
        let freq = (0..counts.rows())
            .map(|i| {
                let row = counts.row(i);
                ((row[0] as usize, row[1] as usize), row[2] as u64)
            })
            .collect();
        let priori = PrioriTable::from_counts(freq, cfg.priori_base)
            .map_err(|e| Error::Checkpoint(format!("priori table: {e}")))?;
        if !params.is_finite() {
            return Err(bad("non-finite parameters"));
        }
        Ok(Self {
            config: cfg,
            vocab: header.vocab,
            base_relations: header.base_relations,
            params,
            priori,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
