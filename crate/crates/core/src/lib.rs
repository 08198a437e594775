//! Topic models and diachronic analytics for time-stamped text corpora.
//!
//! The crate covers the full path from documents to analysis:
//!
//! - [`corpus`]: fetching (HTTP API with disk cache) or loading documents,
//!   lemma-level normalization, and the pruned document-term matrix
//! - [`lda`]: Latent Dirichlet Allocation by collapsed Gibbs sampling
//! - [`nmf`]: non-negative matrix factorization with multiplicative updates
//! - [`divergence`]: KL / Jensen–Shannon divergence and yearly aggregation
//! - [`trends`]: OLS trend per topic and hot / cold classification
//! - [`semmap`]: cosine distances, classical MDS and topic label placement
//! - [`align`]: alignment with an external annual series
//! - [`pipeline`]: file-based stages tying everything together
//!
//! All stochastic steps take an explicit seed and are reproducible.

pub mod align;
pub mod config;
pub mod corpus;
pub mod divergence;
pub mod lda;
pub mod model;
pub mod nmf;
mod numeric;
pub mod pipeline;
pub mod plot;
pub mod semmap;
pub mod trends;

pub use model::{Method, TopicModel};
