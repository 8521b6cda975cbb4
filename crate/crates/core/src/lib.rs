//! ConvD: knowledge graph embeddings whose convolution kernels are sliced
//! from the relation embedding and mixed by priori-biased attention.
//!
//! The crate covers the whole pipeline: TSV ingestion and reciprocal
//! augmentation ([`kgdata`]), the attention and dynamic-convolution scorer
//! with exact backward passes ([`attention`], [`model`]), 1-N training with
//! Adam and early stopping ([`training`]), filtered ranking metrics and
//! experiment runners ([`evaluation`]) and the `convd` command line ([`cli`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod attention;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod kgdata;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
