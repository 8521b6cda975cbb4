//! Log-smoothed (entity, relation) frequency statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::store::{Split, TripleStore};
use crate::error::{Error, Result};

pub const DEFAULT_PRIORI_BASE: f64 = 2.0;

/// Counts of train triples per `(head, relation)`; the priori value is
/// `log_a(count + 1)`, so absent pairs read as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrioriTable {
    freq: BTreeMap<(usize, usize), u64>,
    base: f64,
}

impl PrioriTable {
    pub fn from_counts(freq: BTreeMap<(usize, usize), u64>, base: f64) -> Result<Self> {
        if !(base > 1.0) || !base.is_finite() {
            return Err(Error::InvalidBase(base));
        }
        if freq.values().any(|&c| c == 0) {
            return Err(Error::State("stored priori counts must be >= 1".into()));
        }
        Ok(Self { freq, base })
    }

    /// A table with no counts: every priori value is 0.
    pub fn empty(base: f64) -> Result<Self> {
        Self::from_counts(BTreeMap::new(), base)
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn frequency(&self, entity: usize, relation: usize) -> u64 {
        self.freq.get(&(entity, relation)).copied().unwrap_or(0)
    }

    pub fn value(&self, entity: usize, relation: usize) -> f64 {
        match self.frequency(entity, relation) {
            0 => 0.0,
            c => ((c + 1) as f64).ln() / self.base.ln(),
        }
    }

    pub fn counts(&self) -> &BTreeMap<(usize, usize), u64> {
        &self.freq
    }
}

/// Counts `(head, relation)` pairs over the train split only.
pub fn build_priori(store: &TripleStore, base: f64) -> Result<PrioriTable> {
    let mut freq = BTreeMap::new();
    for t in store.split(Split::Train) {
        *freq.entry((t.head, t.relation)).or_insert(0) += 1;
    }
    PrioriTable::from_counts(freq, base)
}
