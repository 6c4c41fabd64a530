//! Hybrid text retrieval with per-query dynamic alpha tuning (DAT).
//!
//! BM25 and dense retrieval each rank their own candidate pool; the two
//! pools are min-max normalized and combined as
//! `alpha * dense + (1 - alpha) * bm25`. The fixed-alpha baseline applies
//! one weight to every query. DAT instead asks a judge to score each
//! method's top-1 result for the query at hand (0-5) and derives alpha
//! from the score pair, so keyword-ish queries lean on BM25 and
//! semantic-ish queries lean on embeddings.
//!
//! Module map:
//! - [`corpus`]: SQuAD-layout loading, article sampling, tokenization.
//! - [`sparse`]: BM25 inverted index.
//! - [`dense`]: embedding providers, cache, exhaustive cosine search.
//! - [`judge`]: effectiveness scoring of top-1 results (remote LLM,
//!   oracle, replay, fixed).
//! - [`fusion`]: normalization, alpha computation, hybrid search.
//! - [`eval`]: Precision@1 / MRR@20 / alpha-selection metrics and the
//!   evaluation harness.

pub mod corpus;
pub mod dense;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod judge;
pub mod sparse;

pub use error::{Error, Result};
