//! Prediction of academic rising stars from a time-stamped publication corpus.
//!
//! The crate is organised as a batch pipeline:
//!
//! - [`corpus`]: JSON-lines ingestion, temporal snapshots, cohort and labels.
//! - [`graphs`]: collaboration / citation networks and weighted PageRank.
//! - [`topics`]: tokenisation, collapsed-Gibbs LDA and topic groups.
//! - [`features`]: the 18 per-author features and their log transform.
//! - [`ranker`]: the pairwise impact-increment ranker and baselines.
//! - [`eval`]: splits, Pre@k%, per-topic evaluation, transfer and ablation.
//! - [`synth`]: synthetic corpora with a planted signal.
//! - [`pipeline`]: config parsing and the staged on-disk runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod graphs;
pub mod pipeline;
pub mod ranker;
pub mod synth;
pub mod topics;
pub mod util;

pub use error::{Error, Result};

/// Identifier of a paper in the corpus.
pub type PaperId = u64;
/// Identifier of an author.
pub type AuthorId = u64;
/// Identifier of a venue.
pub type VenueId = u64;
