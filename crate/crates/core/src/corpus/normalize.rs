use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use super::document::{DocContent, RawDocument, Token};
use super::matrix::NormalizedDoc;
use super::CorpusError;

const DEFAULT_STOPWORDS: &str = include_str!("../../resources/stopwords_fr.txt");
const DEFAULT_DROP_LEMMAS: &str = include_str!("../../resources/drop_lemmas_fr.txt");
/// A small surface→lemma table for the forms of the dropped light verbs and
/// the commonest function words.
pub const SEED_LEXICON: &str = include_str!("../../resources/lexicon_fr_seed.tsv");

/// Parses a word-list resource: one entry per line, `#` starts a comment line.
pub fn parse_word_list(contents: &str) -> BTreeSet<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

pub fn read_word_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>, CorpusError> {
    let path = path.as_ref();
    let contents = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    Ok(parse_word_list(&contents))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerConfig {
    pub kept_pos_tags: BTreeSet<String>,
    pub stopwords: BTreeSet<String>,
    pub extra_drop_lemmas: BTreeSet<String>,
    pub lowercase: bool,
    pub min_token_length: usize,
}

impl Default for NormalizerConfig {
    /// Nouns, proper nouns, verbs and adjectives; bundled French stopwords and
    /// light-verb / address-term drop list.
    fn default() -> Self {
        NormalizerConfig {
            kept_pos_tags: ["NOUN", "PROPN", "VERB", "ADJ"].iter().map(|s| s.to_string()).collect(),
            stopwords: parse_word_list(DEFAULT_STOPWORDS),
            extra_drop_lemmas: parse_word_list(DEFAULT_DROP_LEMMAS),
            lowercase: true,
            min_token_length: 2,
        }
    }
}

impl NormalizerConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.kept_pos_tags.is_empty() {
            return Err(CorpusError::Config("kept-pos-tags must not be empty".into()));
        }
        Ok(())
    }

    fn is_dropped(&self, lemma: &str) -> bool {
        self.stopwords.contains(lemma) || self.extra_drop_lemmas.contains(lemma)
    }

    /// Returns the normalized lemma if the token survives every filter.
    fn accept(&self, token: &Token) -> Option<String> {
        if !self.kept_pos_tags.contains(token.pos.as_str()) {
            return None;
        }
        let lemma = if self.lowercase { token.lemma.to_lowercase() } else { token.lemma.clone() };
        if lemma.chars().count() < self.min_token_length || self.is_dropped(&lemma) {
            return None;
        }
        Some(lemma)
    }
}

/// Supplies (surface, lemma, pos) annotations for documents that carry raw text.
pub trait LemmaProvider: Sync {
    fn annotate(&self, doc_id: &str, text: &str) -> Result<Vec<Token>, CorpusError>;
}

/// Splits raw text into word tokens: maximal runs of alphanumeric characters,
/// with inner hyphens kept ("peut-être") and apostrophes ending a token
/// ("l'amour" → "l", "amour").
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let next_is_word = chars.peek().map(|&(_, n)| n.is_alphanumeric()).unwrap_or(false);
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if c == '-' && start.is_some() && next_is_word {
            // inner hyphen, keep going
        } else if let Some(s) = start.take() {
            out.push(&text[s..i]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

/// Dictionary lemmatizer: lowercased surface form → (lemma, pos).
///
/// The lexicon is a tab-separated file `surface<TAB>lemma<TAB>pos`. Forms
/// missing from the lexicon keep their lowercased surface as lemma and get
/// `unknown_pos` as tag.
#[derive(Debug, Clone)]
pub struct LexiconLemmatizer {
    entries: HashMap<String, (String, String)>,
    unknown_pos: String,
}

impl LexiconLemmatizer {
    pub fn parse(contents: &str, unknown_pos: impl Into<String>) -> Result<Self, CorpusError> {
        let mut entries = HashMap::new();
        for (i, line) in contents.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(CorpusError::Parse {
                    line: i + 1,
                    message: format!("lexicon line needs 3 tab-separated fields, found {}", fields.len()),
                });
            }
            entries
                .entry(fields[0].to_lowercase())
                .or_insert_with(|| (fields[1].to_owned(), fields[2].to_owned()));
        }
        Ok(LexiconLemmatizer { entries, unknown_pos: unknown_pos.into() })
    }

    pub fn from_path(path: impl AsRef<Path>, unknown_pos: impl Into<String>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Self::parse(&contents, unknown_pos)
    }

    /// Lemmatizer over [`SEED_LEXICON`] only.
    pub fn seed(unknown_pos: impl Into<String>) -> Self {
        Self::parse(SEED_LEXICON, unknown_pos).expect("bundled lexicon is well formed")
    }

    /// Adds the entries of another lexicon; existing entries win.
    pub fn extend_from(&mut self, other: LexiconLemmatizer) {
        for (k, v) in other.entries {
            self.entries.entry(k).or_insert(v);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl LemmaProvider for LexiconLemmatizer {
    fn annotate(&self, _doc_id: &str, text: &str) -> Result<Vec<Token>, CorpusError> {
        Ok(tokenize(text)
            .into_iter()
            .map(|surface| {
                let key = surface.to_lowercase();
                match self.entries.get(&key) {
                    Some((lemma, pos)) => Token::new(surface, lemma.clone(), pos.clone()),
                    None => Token::new(surface, key, self.unknown_pos.clone()),
                }
            })
            .collect())
    }
}

/// Annotations produced by an external tagger, keyed by document id.
///
/// Read from JSONL lines of the form `{"id": ..., "tokens": [[surface, lemma, pos], ...]}`.
#[derive(Debug, Clone, Default)]
pub struct PreAnnotated {
    docs: HashMap<String, Vec<Token>>,
}

#[derive(Deserialize)]
struct AnnotationRecord {
    id: String,
    tokens: Vec<Token>,
}

impl PreAnnotated {
    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        let mut docs = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| CorpusError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationRecord = serde_json::from_str(&line)
                .map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() })?;
            if docs.insert(rec.id.clone(), rec.tokens).is_some() {
                return Err(CorpusError::DuplicateId { line: i + 1, id: rec.id });
            }
        }
        Ok(PreAnnotated { docs })
    }

    pub fn insert(&mut self, id: impl Into<String>, tokens: Vec<Token>) {
        self.docs.insert(id.into(), tokens);
    }
}

impl LemmaProvider for PreAnnotated {
    fn annotate(&self, doc_id: &str, _text: &str) -> Result<Vec<Token>, CorpusError> {
        self.docs.get(doc_id).cloned().ok_or_else(|| CorpusError::InvalidDocument {
            id: doc_id.to_owned(),
            message: "no pre-annotation available".into(),
        })
    }
}

/// Reduces one document to its retained lemmas, in text order.
pub fn normalize(
    doc: &RawDocument,
    cfg: &NormalizerConfig,
    lemmatizer: Option<&dyn LemmaProvider>,
) -> Result<Vec<String>, CorpusError> {
    cfg.validate()?;
    let annotated;
    let tokens: &[Token] = match &doc.content {
        DocContent::Tokens(tokens) => tokens,
        DocContent::Text(text) => {
            let provider = lemmatizer.ok_or_else(|| {
                CorpusError::Config(format!("document \"{}\" carries raw text but no lemmatizer is configured", doc.id))
            })?;
            annotated = provider.annotate(&doc.id, text)?;
            &annotated
        }
    };
    Ok(tokens.iter().filter_map(|t| cfg.accept(t)).collect())
}

/// Normalizes every document in parallel; output order follows input order.
pub fn normalize_all(
    docs: &[RawDocument],
    cfg: &NormalizerConfig,
    lemmatizer: Option<&dyn LemmaProvider>,
) -> Result<Vec<NormalizedDoc>, CorpusError> {
    docs.par_iter()
        .map(|doc| {
            Ok(NormalizedDoc {
                id: doc.id.clone(),
                year: doc.year,
                lemmas: normalize(doc, cfg, lemmatizer)?,
            })
        })
        .collect()
}
