//! Seeded synthetic knowledge graphs with learnable structure.
//!
//! A random permutation `π` over the entities defines relation `perm`
//! (`e → π(e)`) and its explicit inverse `perm_inv`. Every further relation
//! `hop_k` is the `k`-fold composition `π^k`, with `k` cycling through
//! `1..=composition_depth`. Each relation contributes one triple per entity.
//! The triples are shuffled and split 80/10/10; valid/test triples whose
//! symbols are missing from train are swapped with train triples that can be
//! spared, so split sizes stay exact.

use std::collections::HashMap;

use super::store::{Dataset, Triple, TripleStore};
use super::vocab::{SymbolTable, Vocab};
use crate::error::{Error, Result};
use crate::numerics::rng::RngStream;

pub const STREAM_TOY_PERMUTATION: &str = "toy.permutation";
pub const STREAM_TOY_SPLIT: &str = "toy.split";

/// Triples per split for a generated graph: `(train, valid, test)`.
pub fn toy_split_sizes(n_entities: usize, n_relations: usize) -> (usize, usize, usize) {
    let total = n_entities * n_relations;
    let held = total / 10;
    (total - 2 * held, held, held)
}

/// Number of hops of relation `relation` (`0` = perm, `1` = perm_inv).
pub fn toy_relation_hops(relation: usize, composition_depth: usize) -> Option<usize> {
    match relation {
        0 | 1 => None,
        r => Some(1 + (r - 2) % composition_depth),
    }
}

pub fn generate_toy_kg(
    seed: u64,
    n_entities: usize,
    n_relations: usize,
    composition_depth: usize,
) -> Result<Dataset> {
    if n_entities < 20 {
        return Err(Error::Generation(format!(
            "need at least 20 entities, got {n_entities}"
        )));
    }
    if n_relations < 2 {
        return Err(Error::Generation(format!(
            "need at least 2 relations, got {n_relations}"
        )));
    }
    if composition_depth == 0 {
        return Err(Error::Generation("composition depth must be >= 1".into()));
    }

    let width = (n_entities - 1).to_string().len();
    let entities = SymbolTable::from_ordered((0..n_entities).map(|i| format!("e{i:0width$}")));
    let mut rel_names = vec!["perm".to_owned(), "perm_inv".to_owned()];
    for r in 2..n_relations {
        let k = toy_relation_hops(r, composition_depth).unwrap_or(1);
        rel_names.push(format!("hop{k}_{r:02}"));
    }
    let relations = SymbolTable::from_ordered(rel_names);

    let mut perm: Vec<usize> = (0..n_entities).collect();
    RngStream::new(seed, STREAM_TOY_PERMUTATION).shuffle(&mut perm);

    let mut triples = Vec::with_capacity(n_entities * n_relations);
    for r in 0..n_relations {
        for e in 0..n_entities {
            let tail = match toy_relation_hops(r, composition_depth) {
                None if r == 0 => perm[e],
                None => {
                    // perm_inv: π(e) → e
                    triples.push(Triple::new(perm[e], r, e));
                    continue;
                }
                Some(k) => (0..k).fold(e, |x, _| perm[x]),
            };
            triples.push(Triple::new(e, r, tail));
        }
    }
    RngStream::new(seed, STREAM_TOY_SPLIT).shuffle(&mut triples);

    let (_, n_valid, n_test) = toy_split_sizes(n_entities, n_relations);
    let mut test: Vec<Triple> = triples.drain(..n_test).collect();
    let mut valid: Vec<Triple> = triples.drain(..n_valid).collect();
    let mut train = triples;
    if train.is_empty() || valid.is_empty() || test.is_empty() {
        return Err(Error::Generation(
            "graph too small to populate all splits".into(),
        ));
    }
    ensure_train_coverage(&mut train, &mut valid)?;
    ensure_train_coverage(&mut train, &mut test)?;

    let vocab = Vocab::new(entities, relations);
    let store = TripleStore::new(n_entities, n_relations, train, valid, test)?;
    Ok(Dataset { vocab, store })
}

#[derive(Default)]
struct Coverage {
    entities: HashMap<usize, usize>,
    relations: HashMap<usize, usize>,
}

impl Coverage {
    fn of(ts: &[Triple]) -> Self {
        let mut c = Self::default();
        ts.iter().for_each(|t| c.add(t, 1));
        c
    }

    fn add(&mut self, t: &Triple, n: isize) {
        for e in [t.head, t.tail] {
            let v = self.entities.entry(e).or_default();
            *v = v.checked_add_signed(n).unwrap_or(0);
        }
        let v = self.relations.entry(t.relation).or_default();
        *v = v.checked_add_signed(n).unwrap_or(0);
    }

    fn covers(&self, t: &Triple) -> bool {
        [t.head, t.tail]
            .iter()
            .all(|e| self.entities.get(e).is_some_and(|&c| c > 0))
            && self.relations.get(&t.relation).is_some_and(|&c| c > 0)
    }

    /// Whether `t` can leave the train split without uncovering anything.
    fn spare(&self, t: &Triple) -> bool {
        let need = |c: Option<&usize>, uses: usize| c.is_some_and(|&c| c > uses);
        let head_uses = if t.head == t.tail { 2 } else { 1 };
        need(self.entities.get(&t.head), head_uses)
            && need(self.entities.get(&t.tail), head_uses)
            && need(self.relations.get(&t.relation), 1)
    }
}

fn ensure_train_coverage(train: &mut [Triple], held: &mut [Triple]) -> Result<()> {
    let mut cov = Coverage::of(train);
    for i in 0..held.len() {
        if cov.covers(&held[i]) {
            continue;
        }
        let candidate = held[i];
        // swap with the last spare train triple whose departure keeps the
        // incoming one and everything else covered
        let mut swapped = false;
        for j in (0..train.len()).rev() {
            let out = train[j];
            if !cov.spare(&out) {
                continue;
            }
            cov.add(&out, -1);
            cov.add(&candidate, 1);
            let still_fine = held[..i].iter().all(|t| cov.covers(t));
            if still_fine {
                train[j] = candidate;
                held[i] = out;
                swapped = true;
                break;
            }
            cov.add(&candidate, -1);
            cov.add(&out, 1);
        }
        if !swapped || !cov.covers(&held[i]) {
            return Err(Error::Generation(
                "cannot cover every held-out symbol with the train split".into(),
            ));
        }
    }
    Ok(())
}
