//! Bidirectional symbol ↔ id maps for entities and relations.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One direction of a vocabulary: dense ids in `[0, len)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct SymbolTable {
    symbols: Vec<String>,
    ids: HashMap<String, usize>,
}

impl SymbolTable {
    /// Table over `symbols` in the given order; duplicates are dropped.
    pub fn from_ordered<I: IntoIterator<Item = String>>(symbols: I) -> Self {
        let mut table = Self::default();
        for s in symbols {
            table.insert(s);
        }
        table
    }

    /// Table over `symbols` sorted lexicographically.
    pub fn from_unordered<I: IntoIterator<Item = String>>(symbols: I) -> Self {
        let set: BTreeSet<String> = symbols.into_iter().collect();
        Self::from_ordered(set)
    }

    fn insert(&mut self, s: String) -> usize {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.symbols.len();
        self.ids.insert(s.clone(), id);
        self.symbols.push(s);
        id
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Up to `n` symbols closest to `query` by edit distance (ties by id).
    pub fn nearest(&self, query: &str, n: usize) -> Vec<&str> {
        let mut scored: Vec<(usize, usize)> = self
            .symbols
            .iter()
            .enumerate()
            .map(|(id, s)| (edit_distance(query, s), id))
            .collect();
        scored.sort_unstable();
        scored
            .into_iter()
            .take(n)
            .map(|(_, id)| self.symbols[id].as_str())
            .collect()
    }
}

impl From<Vec<String>> for SymbolTable {
    fn from(v: Vec<String>) -> Self {
        Self::from_ordered(v)
    }
}

impl From<SymbolTable> for Vec<String> {
    fn from(t: SymbolTable) -> Self {
        t.symbols
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub entities: SymbolTable,
    pub relations: SymbolTable,
}

impl Vocab {
    pub fn new(entities: SymbolTable, relations: SymbolTable) -> Self {
        Self {
            entities,
            relations,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, s: &str) -> Result<usize> {
        self.entities.id(s).ok_or_else(|| Error::Vocabulary {
            kind: "entity",
            symbol: s.to_owned(),
        })
    }

    pub fn relation_id(&self, s: &str) -> Result<usize> {
        self.relations.id(s).ok_or_else(|| Error::Vocabulary {
            kind: "relation",
            symbol: s.to_owned(),
        })
    }

    /// Adds symbols not yet present, new ones in lexicographic order after
    /// the existing ids.
    pub(crate) fn extend<'a>(
        &mut self,
        entities: impl IntoIterator<Item = &'a str>,
        relations: impl IntoIterator<Item = &'a str>,
    ) {
        let new_e: BTreeSet<&str> = entities
            .into_iter()
            .filter(|s| self.entities.id(s).is_none())
            .collect();
        let new_r: BTreeSet<&str> = relations
            .into_iter()
            .filter(|s| self.relations.id(s).is_none())
            .collect();
        for s in new_e {
            self.entities.insert(s.to_owned());
        }
        for s in new_r {
            self.relations.insert(s.to_owned());
        }
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unordered_tables_are_sorted_and_dense() {
        let t = SymbolTable::from_unordered(["b", "a", "c", "a"].map(String::from));
        assert_eq!(t.symbols(), &["a", "b", "c"]);
        assert_eq!(t.id("c"), Some(2));
        assert_eq!(t.symbol(1), Some("b"));
        assert_eq!(t.id("zz"), None);
    }

    #[test]
    fn nearest_by_edit_distance() {
        let t =
            SymbolTable::from_unordered(["apple", "apply", "banana", "grape"].map(String::from));
        assert_eq!(t.nearest("appel", 2), vec!["apple", "apply"]);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
    }

    #[test]
    fn serde_round_trip_keeps_ids() {
        let v = Vocab::new(
            SymbolTable::from_ordered(["z", "a"].map(String::from)),
            SymbolTable::from_ordered(["r"].map(String::from)),
        );
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.entity_id("z").unwrap(), 0);
    }
}
