//! 1-N training targets: one multi-label row per `(head, relation)` query.

use std::collections::{BTreeMap, BTreeSet};

use super::store::{Split, TripleStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OneToNTarget {
    pub head: usize,
    pub relation: usize,
    /// Sorted, deduplicated tail ids.
    pub positives: Vec<usize>,
    pub label_smoothing: f64,
    pub n_entities: usize,
}

impl OneToNTarget {
    /// `(1 − ε)·𝟙[t ∈ positives] + ε/|E|` for every entity.
    pub fn smoothed(&self) -> Vec<f64> {
        let eps = self.label_smoothing;
        let floor = eps / self.n_entities as f64;
        let mut y = vec![floor; self.n_entities];
        for &t in &self.positives {
            y[t] = 1.0 - eps + floor;
        }
        y
    }
}

/// One target per distinct `(head, relation)` in `split`, ordered by key.
pub fn one_to_n_targets(
    store: &TripleStore,
    split: Split,
    label_smoothing: f64,
    n_entities: usize,
) -> Result<Vec<OneToNTarget>> {
    if !(0.0..1.0).contains(&label_smoothing) {
        return Err(Error::InvalidProbability(label_smoothing));
    }
    let mut groups: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for t in store.split(split) {
        if t.tail >= n_entities || t.head >= n_entities {
            return Err(Error::Index {
                index: t.tail.max(t.head),
                len: n_entities,
            });
        }
        groups
            .entry((t.head, t.relation))
            .or_default()
            .insert(t.tail);
    }
    Ok(groups
        .into_iter()
        .map(|((head, relation), tails)| OneToNTarget {
            head,
            relation,
            positives: tails.into_iter().collect(),
            label_smoothing,
            n_entities,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::store::Triple;
    use proptest::prelude::*;

    fn store(train: Vec<Triple>) -> TripleStore {
        TripleStore::new(10, 2, train, vec![], vec![]).unwrap()
    }

    #[test]
    fn zero_smoothing_is_indicator() {
        let s = store(vec![Triple::new(0, 0, 3)]);
        let t = &one_to_n_targets(&s, Split::Train, 0.0, 10).unwrap()[0];
        let y = t.smoothed();
        assert_eq!(y[3], 1.0);
        assert_eq!(y.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn smoothing_point_one_over_ten_entities() {
        let s = store(vec![Triple::new(0, 0, 3)]);
        let y = one_to_n_targets(&s, Split::Train, 0.1, 10).unwrap()[0].smoothed();
        assert!((y[3] - 0.91).abs() < 1e-15);
        assert!(y
            .iter()
            .enumerate()
            .all(|(i, &v)| i == 3 || (v - 0.01).abs() < 1e-15));
    }

    #[test]
    fn shared_query_is_grouped() {
        let s = store(vec![
            Triple::new(0, 0, 3),
            Triple::new(0, 0, 5),
            Triple::new(1, 0, 3),
        ]);
        let ts = one_to_n_targets(&s, Split::Train, 0.1, 10).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].positives, vec![3, 5]);
    }

    #[test]
    fn invalid_smoothing_is_rejected() {
        let s = store(vec![]);
        assert!(one_to_n_targets(&s, Split::Train, 1.0, 10).is_err());
    }

    proptest! {
        #[test]
        fn smoothed_bounds_and_mass(
            tails in proptest::collection::btree_set(0usize..10, 1..6),
            eps in 0.0f64..0.9,
        ) {
            let train = tails.iter().map(|&t| Triple::new(0, 1, t)).collect();
            let t = &one_to_n_targets(&store(train), Split::Train, eps, 10).unwrap()[0];
            let y = t.smoothed();
            let min = y.iter().copied().fold(f64::INFINITY, f64::min);
            let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((max - (1.0 - eps + eps / 10.0)).abs() < 1e-15);
            if tails.len() < 10 {
                prop_assert!((min - eps / 10.0).abs() < 1e-15);
            }
            let mass = tails.len() as f64 * (1.0 - eps) + eps;
            prop_assert!((y.iter().sum::<f64>() - mass).abs() < 1e-12);
        }
    }
}
