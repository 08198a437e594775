//! Corpus acquisition and preprocessing.
//!
//! Documents come either from a DraCor-style HTTP API ([`fetch`]) or from a
//! local JSONL file ([`document::load_local_corpus`]). They are reduced to
//! filtered lemma streams by [`normalize`] and assembled into a pruned sparse
//! document-term matrix by [`matrix::build_matrix`].

pub mod document;
pub mod fetch;
pub mod matrix;
pub mod normalize;

use std::path::PathBuf;

use thiserror::Error;

pub use document::{filter_years, load_local_corpus, write_corpus, DocContent, RawDocument, Token};
pub use fetch::{fetch_corpus, fetch_corpus_with, FetchOptions, HttpTransport, Transport, TransportError};
pub use matrix::{build_matrix, DocTermMatrix, DroppedDoc, MatrixBuild, MatrixConfig, NormalizedDoc, Vocabulary};
pub use normalize::{
    normalize, normalize_all, tokenize, LemmaProvider, LexiconLemmatizer, NormalizerConfig, PreAnnotated,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing required field \"{field}\"")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: duplicate document id \"{id}\"")]
    DuplicateId { line: usize, id: String },
    #[error("document \"{id}\": {message}")]
    InvalidDocument { id: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("vocabulary is empty after pruning (min-df {min_df}, max-df-fraction {max_df_fraction})")]
    EmptyVocabulary { min_df: usize, max_df_fraction: f64 },
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("corpus \"{name}\" not found at {api_base}")]
    UnknownCorpus { name: String, api_base: String },
    #[error("malformed response for play \"{play}\": {message}")]
    MalformedResponse { play: String, message: String },
    #[error("matrix file line {line}: {message}")]
    MatrixFormat { line: usize, message: String },
}

impl CorpusError {
    /// Whether retrying the same operation later may succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, CorpusError::Network { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.into(), source }
    }
}
