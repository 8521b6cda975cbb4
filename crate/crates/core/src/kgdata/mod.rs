//! Triple ingestion, vocabularies, reciprocal augmentation, the priori
//! frequency table, 1-N targets and synthetic graphs.

pub mod priori;
pub mod store;
pub mod targets;
pub mod toy;
pub mod vocab;

pub use priori::{build_priori, PrioriTable, DEFAULT_PRIORI_BASE};
pub use store::{
    dataset_fingerprint, load_dataset, load_triples, load_triples_with, to_tsv, Dataset, Split,
    Triple, TripleStore,
};
pub use targets::{one_to_n_targets, OneToNTarget};
pub use toy::generate_toy_kg;
pub use vocab::{SymbolTable, Vocab};
