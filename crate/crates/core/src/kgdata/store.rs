//! Triple files, split storage and the filtered-candidate index.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::vocab::{SymbolTable, Vocab};
use crate::error::{Error, Result};

/// Suffix naming the reciprocal of a relation in user-facing output.
pub const RECIPROCAL_SUFFIX: &str = "^-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split `{other}` (expected train, valid or test)"
            ))),
        }
    }
}

/// Train/valid/test triples over a fixed id space.
///
/// `all_true` is the deduplicated union of the splits; the filter index maps
/// every `(head, relation)` to the sorted tails that are true in any split.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleStore {
    n_entities: usize,
    n_relations: usize,
    base_relations: Option<usize>,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    all_true: HashSet<Triple>,
    filter: BTreeMap<(usize, usize), Vec<usize>>,
}

impl TripleStore {
    pub fn new(
        n_entities: usize,
        n_relations: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        for t in train.iter().chain(&valid).chain(&test) {
            check_triple(t, n_entities, n_relations)?;
        }
        let mut store = Self {
            n_entities,
            n_relations,
            base_relations: None,
            train,
            valid,
            test,
            all_true: HashSet::new(),
            filter: BTreeMap::new(),
        };
        store.reindex();
        Ok(store)
    }

    fn reindex(&mut self) {
        let mut filter: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        self.all_true.clear();
        for t in self.train.iter().chain(&self.valid).chain(&self.test) {
            self.all_true.insert(*t);
            filter
                .entry((t.head, t.relation))
                .or_default()
                .insert(t.tail);
        }
        self.filter = filter
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect();
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    /// Relation count, including reciprocals once augmented.
    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    /// Relation count before augmentation; `None` if not augmented.
    pub fn base_relations(&self) -> Option<usize> {
        self.base_relations
    }

    pub fn is_augmented(&self) -> bool {
        self.base_relations.is_some()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn all_true(&self) -> &HashSet<Triple> {
        &self.all_true
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.all_true.contains(t)
    }

    /// Tails `t` with `(head, relation, t)` true in any split, sorted.
    pub fn filtered_candidates(&self, head: usize, relation: usize) -> &[usize] {
        self.filter
            .get(&(head, relation))
            .map_or(&[], Vec::as_slice)
    }

    /// Whether `relation` is a reciprocal added by augmentation.
    pub fn is_reciprocal(&self, relation: usize) -> bool {
        self.base_relations.is_some_and(|b| relation >= b)
    }

    /// Adds `(t, r⁻¹, h)` for every `(h, r, t)` in the same split, with
    /// `r⁻¹ = r + |R|`.
    pub fn augment_reciprocal(&self) -> Result<Self> {
        if self.is_augmented() {
            return Err(Error::State("store is already augmented".into()));
        }
        let base = self.n_relations;
        let mirror = |ts: &[Triple]| -> Vec<Triple> {
            ts.iter()
                .copied()
                .chain(
                    ts.iter()
                        .map(|t| Triple::new(t.tail, t.relation + base, t.head)),
                )
                .collect()
        };
        let mut store = Self {
            n_entities: self.n_entities,
            n_relations: 2 * base,
            base_relations: Some(base),
            train: mirror(&self.train),
            valid: mirror(&self.valid),
            test: mirror(&self.test),
            all_true: HashSet::new(),
            filter: BTreeMap::new(),
        };
        store.reindex();
        Ok(store)
    }

    /// The original (pre-augmentation) triples of a split. For an augmented
    /// store these are the leading half of the split array.
    pub fn base_split(&self, split: Split) -> &[Triple] {
        let s = self.split(split);
        if self.is_augmented() {
            &s[..s.len() / 2]
        } else {
            s
        }
    }

    /// Same store with one split emptied.
    pub fn without_split(&self, split: Split) -> Self {
        let mut s = self.clone();
        match split {
            Split::Train => s.train.clear(),
            Split::Valid => s.valid.clear(),
            Split::Test => s.test.clear(),
        }
        s.reindex();
        s
    }
}

fn check_triple(t: &Triple, n_entities: usize, n_relations: usize) -> Result<()> {
    for (index, len) in [
        (t.head, n_entities),
        (t.tail, n_entities),
        (t.relation, n_relations),
    ] {
        if index >= len {
            return Err(Error::Index { index, len });
        }
    }
    Ok(())
}

/// A vocabulary together with the store whose ids it names.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: Vocab,
    pub store: TripleStore,
}

impl Dataset {
    /// Relation name for an id of a possibly augmented store.
    pub fn relation_name(&self, id: usize) -> String {
        let base = self.vocab.n_relations();
        match self.vocab.relations.symbol(id) {
            Some(s) => s.to_owned(),
            None => match self.vocab.relations.symbol(id.wrapping_sub(base)) {
                Some(s) => format!("{s}{RECIPROCAL_SUFFIX}"),
                None => format!("<relation {id}>"),
            },
        }
    }
}

type RawTriple = (String, String, String);

fn parse_file(path: &Path) -> Result<Vec<RawTriple>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: 0,
        message: format!("not valid UTF-8: {e}"),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let fail = |message: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        if line.contains('\r') {
            return Err(fail(
                "carriage return found; files must use LF line endings".into(),
            ));
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(fail(format!(
                "expected head<TAB>relation<TAB>tail, found {} tab separator(s)",
                parts.len() - 1
            )));
        }
        if parts.iter().any(|p| p.is_empty()) {
            return Err(fail("empty symbol".into()));
        }
        out.push((
            parts[0].to_owned(),
            parts[1].to_owned(),
            parts[2].to_owned(),
        ));
    }
    Ok(out)
}

fn resolve(raw: &[RawTriple], vocab: &Vocab) -> Result<Vec<Triple>> {
    raw.iter()
        .map(|(h, r, t)| {
            Ok(Triple::new(
                vocab.entity_id(h)?,
                vocab.relation_id(r)?,
                vocab.entity_id(t)?,
            ))
        })
        .collect()
}

/// Loads a TSV triple file.
///
/// Without a vocabulary, one is built from the file with ids in
/// lexicographic symbol order. With one, unseen symbols are an error.
pub fn load_triples(path: &Path, vocab: Option<Vocab>) -> Result<(Vocab, Vec<Triple>)> {
    load_triples_with(path, vocab, true)
}

/// As [`load_triples`]; with `strict = false` unseen symbols extend the
/// given vocabulary instead of failing.
pub fn load_triples_with(
    path: &Path,
    vocab: Option<Vocab>,
    strict: bool,
) -> Result<(Vocab, Vec<Triple>)> {
    let raw = parse_file(path)?;
    let vocab = match vocab {
        None => Vocab::new(
            SymbolTable::from_unordered(raw.iter().flat_map(|(h, _, t)| [h.clone(), t.clone()])),
            SymbolTable::from_unordered(raw.iter().map(|(_, r, _)| r.clone())),
        ),
        Some(v) if strict => v,
        Some(mut v) => {
            v.extend(
                raw.iter().flat_map(|(h, _, t)| [h.as_str(), t.as_str()]),
                raw.iter().map(|(_, r, _)| r.as_str()),
            );
            v
        }
    };
    let triples = resolve(&raw, &vocab)?;
    Ok((vocab, triples))
}

/// Loads `train`, then `valid` and `test` against the train vocabulary.
pub fn load_dataset(train: &Path, valid: &Path, test: &Path) -> Result<Dataset> {
    let (vocab, tr) = load_triples(train, None)?;
    let (vocab, va) = load_triples(valid, Some(vocab))?;
    let (vocab, te) = load_triples(test, Some(vocab))?;
    let store = TripleStore::new(vocab.n_entities(), vocab.n_relations(), tr, va, te)?;
    Ok(Dataset { vocab, store })
}

/// SHA-256 over the three split files, each prefixed by its byte length.
pub fn dataset_fingerprint(paths: [&Path; 3]) -> Result<String> {
    let mut hasher = Sha256::new();
    for p in paths {
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Renders triples in the TSV format read by [`load_triples`].
pub fn to_tsv(triples: &[Triple], vocab: &Vocab) -> String {
    let mut out = String::new();
    for t in triples {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            vocab.entities.symbol(t.head).unwrap_or("?"),
            vocab.relations.symbol(t.relation).unwrap_or("?"),
            vocab.entities.symbol(t.tail).unwrap_or("?"),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn empty_file_gives_empty_vocab() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "train.txt", "");
        let (v, ts) = load_triples(&p, None).unwrap();
        assert!(ts.is_empty());
        assert_eq!((v.n_entities(), v.n_relations()), (0, 0));
    }

    #[test]
    fn duplicates_kept_in_split_but_not_in_all_true() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "train.txt", "a\tr\tb\nb\tr\tc\na\tr\tb\n");
        let (v, ts) = load_triples(&p, None).unwrap();
        assert_eq!(ts.len(), 3);
        let store = TripleStore::new(v.n_entities(), v.n_relations(), ts, vec![], vec![]).unwrap();
        assert_eq!(store.all_true().len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "train.txt", "a\tr\tb\na r b\n");
        match load_triples(&p, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let p = write(&dir, "crlf.txt", "a\tr\tb\r\n");
        assert!(matches!(
            load_triples(&p, None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn strict_mode_rejects_unseen_symbols() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write(&dir, "train.txt", "a\tr\tb\n");
        let te = write(&dir, "test.txt", "a\tr\tz\n");
        let (v, _) = load_triples(&tr, None).unwrap();
        assert!(matches!(
            load_triples(&te, Some(v.clone())),
            Err(Error::Vocabulary { kind: "entity", .. })
        ));
        let (v2, ts) = load_triples_with(&te, Some(v), false).unwrap();
        assert_eq!(v2.entity_id("z").unwrap(), 2);
        assert_eq!(ts[0].tail, 2);
    }

    #[test]
    fn vocab_ids_are_lexicographic_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "train.txt", "zeta\tr2\talpha\nmid\tr1\tzeta\n");
        let (v1, t1) = load_triples(&p, None).unwrap();
        let (v2, t2) = load_triples(&p, None).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(t1, t2);
        assert_eq!(v1.entities.symbols(), &["alpha", "mid", "zeta"]);
        assert_eq!(v1.relations.symbols(), &["r1", "r2"]);
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        let r = TripleStore::new(2, 1, vec![Triple::new(0, 1, 1)], vec![], vec![]);
        assert!(matches!(r, Err(Error::Index { index: 1, len: 1 })));
    }

    #[test]
    fn augmentation_doubles_relations_and_mirrors_truth() {
        let s = TripleStore::new(3, 1, vec![Triple::new(0, 0, 2)], vec![], vec![]).unwrap();
        let a = s.augment_reciprocal().unwrap();
        assert_eq!(a.n_relations(), 2);
        assert_eq!(a.split(Split::Train).len(), 2);
        assert!(a.contains(&Triple::new(2, 1, 0)));
        assert_eq!(a.base_split(Split::Train), &[Triple::new(0, 0, 2)]);
        assert!(matches!(a.augment_reciprocal(), Err(Error::State(_))));
        for t in a.all_true() {
            let base = a.base_relations().unwrap();
            let r = if t.relation >= base {
                t.relation - base
            } else {
                t.relation + base
            };
            assert!(a.contains(&Triple::new(t.tail, r, t.head)));
        }
    }

    #[test]
    fn filtered_candidates_span_all_splits() {
        let s = TripleStore::new(
            4,
            1,
            vec![Triple::new(0, 0, 1)],
            vec![],
            vec![Triple::new(0, 0, 3)],
        )
        .unwrap();
        assert_eq!(s.filtered_candidates(0, 0), &[1, 3]);
        assert!(s.filtered_candidates(2, 0).is_empty());
    }

    #[test]
    fn split_names_parse() {
        assert_eq!("valid".parse::<Split>().unwrap(), Split::Valid);
        assert!("dev".parse::<Split>().is_err());
    }
}
