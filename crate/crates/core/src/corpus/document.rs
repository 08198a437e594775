use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// A single annotated token: surface form, lemma and part-of-speech tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: String,
}

impl Token {
    pub fn new(surface: impl Into<String>, lemma: impl Into<String>, pos: impl Into<String>) -> Self {
        Token { surface: surface.into(), lemma: lemma.into(), pos: pos.into() }
    }
}

impl From<(String, String, String)> for Token {
    fn from((surface, lemma, pos): (String, String, String)) -> Self {
        Token { surface, lemma, pos }
    }
}

impl From<Token> for (String, String, String) {
    fn from(t: Token) -> Self {
        (t.surface, t.lemma, t.pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DocContent {
    Text(String),
    Tokens(Vec<Token>),
}

/// One play of the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDocument {
    pub id: String,
    pub year: i32,
    pub title: String,
    pub content: DocContent,
}

#[derive(Serialize, Deserialize)]
struct DocRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    year: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<Token>>,
}

impl DocRecord {
    fn into_document(self, line: usize) -> Result<RawDocument, CorpusError> {
        let id = self.id.ok_or(CorpusError::MissingField { line, field: "id" })?;
        let year = self.year.ok_or(CorpusError::MissingField { line, field: "year" })?;
        let year = i32::try_from(year)
            .map_err(|_| CorpusError::Parse { line, message: format!("year {year} out of range") })?;
        let content = match (self.text, self.tokens) {
            (Some(text), None) => DocContent::Text(text),
            (None, Some(tokens)) => DocContent::Tokens(tokens),
            (Some(_), Some(_)) => {
                return Err(CorpusError::InvalidDocument {
                    id,
                    message: format!("line {line}: both \"text\" and \"tokens\" present"),
                })
            }
            (None, None) => {
                return Err(CorpusError::InvalidDocument {
                    id,
                    message: format!("line {line}: neither \"text\" nor \"tokens\" present"),
                })
            }
        };
        Ok(RawDocument { id, year, title: self.title.unwrap_or_default(), content })
    }

    fn from_document(doc: &RawDocument) -> Self {
        let (text, tokens) = match &doc.content {
            DocContent::Text(t) => (Some(t.clone()), None),
            DocContent::Tokens(t) => (None, Some(t.clone())),
        };
        DocRecord {
            id: Some(doc.id.clone()),
            year: Some(doc.year as i64),
            title: Some(doc.title.clone()),
            text,
            tokens,
        }
    }
}

/// Reads a JSONL corpus, one document object per line. Blank lines are skipped;
/// line numbers in errors are 1-based.
pub fn load_local_corpus(path: impl AsRef<Path>) -> Result<Vec<RawDocument>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Parse { line: line_no, message: e.to_string() })?;
        let doc = record.into_document(line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: doc.id });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Writes documents in the same JSONL layout [`load_local_corpus`] reads.
pub fn write_corpus(path: impl AsRef<Path>, docs: &[RawDocument]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| CorpusError::io(path, e))?);
    for doc in docs {
        let line = serde_json::to_string(&DocRecord::from_document(doc))
            .expect("document records always serialize");
        writeln!(out, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

/// Keeps documents whose year lies in `start..=end`, preserving order.
pub fn filter_years(docs: Vec<RawDocument>, start: i32, end: i32) -> Vec<RawDocument> {
    let before = docs.len();
    let kept: Vec<_> = docs.into_iter().filter(|d| d.year >= start && d.year <= end).collect();
    if kept.len() < before {
        log::info!("year filter {start}-{end}: kept {} of {before} documents", kept.len());
    }
    kept
}
