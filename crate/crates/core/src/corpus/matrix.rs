use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use super::CorpusError;

/// A document reduced to its retained lemmas.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDoc {
    pub id: String,
    pub year: i32,
    pub lemmas: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConfig {
    pub min_df: usize,
    pub max_df_fraction: f64,
    /// Documents with fewer retained tokens than this are dropped.
    pub min_doc_tokens: usize,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig { min_df: 5, max_df_fraction: 0.5, min_doc_tokens: 20 }
    }
}

impl MatrixConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_df < 1 {
            return Err(CorpusError::Config("min-df must be at least 1".into()));
        }
        if !(self.max_df_fraction > 0.0 && self.max_df_fraction <= 1.0) {
            return Err(CorpusError::Config(format!(
                "max-df-fraction must lie in (0, 1], got {}",
                self.max_df_fraction
            )));
        }
        Ok(())
    }
}

/// Retained terms, sorted lexicographically, with their document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    document_frequency: Vec<usize>,
}

impl Vocabulary {
    fn new(terms: Vec<String>, document_frequency: Vec<usize>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, index, document_frequency }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self) -> &[usize] {
        &self.document_frequency
    }

    pub fn hash(&self) -> String {
        vocabulary_hash(&self.terms)
    }
}

/// SHA-256 over the newline-joined term list.
pub fn vocabulary_hash(terms: &[String]) -> String {
    let mut h = Sha256::new();
    for t in terms {
        h.update(t.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Sparse document-term counts. Each row holds `(term index, count)` pairs
/// sorted by term index, with no zero counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    rows: Vec<Vec<(usize, u32)>>,
    terms: Vec<String>,
    doc_ids: Vec<String>,
    doc_years: Vec<i32>,
}

impl DocTermMatrix {
    /// Builds a matrix from explicit rows. Panics if the parallel lists
    /// disagree in length or a term index is out of range.
    pub fn from_rows(
        rows: Vec<Vec<(usize, u32)>>,
        terms: Vec<String>,
        doc_ids: Vec<String>,
        doc_years: Vec<i32>,
    ) -> Self {
        assert_eq!(rows.len(), doc_ids.len(), "rows and doc ids disagree");
        assert_eq!(rows.len(), doc_years.len(), "rows and doc years disagree");
        let rows: Vec<Vec<(usize, u32)>> = rows
            .into_iter()
            .map(|row| {
                let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
                for (t, c) in row {
                    assert!(t < terms.len(), "term index {t} out of range");
                    *merged.entry(t).or_default() += c;
                }
                merged.into_iter().filter(|&(_, c)| c > 0).collect()
            })
            .collect();
        DocTermMatrix { rows, terms, doc_ids, doc_years }
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn row(&self, d: usize) -> &[(usize, u32)] {
        &self.rows[d]
    }

    pub fn rows(&self) -> &[Vec<(usize, u32)>] {
        &self.rows
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_years(&self) -> &[i32] {
        &self.doc_years
    }

    pub fn vocab_hash(&self) -> String {
        vocabulary_hash(&self.terms)
    }

    pub fn doc_total(&self, d: usize) -> u64 {
        self.rows[d].iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        (0..self.n_docs()).map(|d| self.doc_total(d)).sum()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Writes the triplet format: a `D V NNZ` header then one
    /// `doc term count` line per nonzero entry (0-based indices).
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.n_docs(), self.n_terms(), self.nnz())?;
        for (d, row) in self.rows.iter().enumerate() {
            for &(t, c) in row {
                writeln!(out, "{d} {t} {c}")?;
            }
        }
        out.flush()
    }

    /// Reads the triplet format back; `terms`, `doc_ids` and `doc_years` must
    /// match the header dimensions.
    pub fn read_triplets<R: BufRead>(
        input: R,
        terms: Vec<String>,
        doc_ids: Vec<String>,
        doc_years: Vec<i32>,
    ) -> Result<Self, CorpusError> {
        let mut lines = input.lines().enumerate();
        let bad = |line: usize, message: String| CorpusError::MatrixFormat { line, message };
        let parse3 = |line: usize, s: &str| -> Result<[usize; 3], CorpusError> {
            let parts: Vec<&str> = s.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad(line, format!("expected 3 fields, found {}", parts.len())));
            }
            let mut out = [0usize; 3];
            for (o, p) in out.iter_mut().zip(&parts) {
                *o = p.parse().map_err(|_| bad(line, format!("not an integer: {p}")))?;
            }
            Ok(out)
        };
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let header = header.map_err(|e| bad(1, e.to_string()))?;
        let [n_docs, n_terms, nnz] = parse3(1, &header)?;
        if n_docs != doc_ids.len() || n_docs != doc_years.len() {
            return Err(bad(1, format!("header says {n_docs} documents, metadata has {}", doc_ids.len())));
        }
        if n_terms != terms.len() {
            return Err(bad(1, format!("header says {n_terms} terms, vocabulary has {}", terms.len())));
        }
        let mut rows = vec![Vec::new(); n_docs];
        let mut seen = 0usize;
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| bad(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let [d, t, c] = parse3(line_no, &line)?;
            if d >= n_docs || t >= n_terms {
                return Err(bad(line_no, format!("entry ({d}, {t}) outside {n_docs}x{n_terms}")));
            }
            let c = u32::try_from(c).map_err(|_| bad(line_no, format!("count {c} too large")))?;
            rows[d].push((t, c));
            seen += 1;
        }
        if seen != nnz {
            return Err(bad(1, format!("header says {nnz} entries, found {seen}")));
        }
        Ok(DocTermMatrix::from_rows(rows, terms, doc_ids, doc_years))
    }
}

/// A document removed during matrix construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedDoc {
    pub id: String,
    pub year: i32,
    pub retained_tokens: usize,
}

#[derive(Debug, Clone)]
pub struct MatrixBuild {
    pub vocabulary: Vocabulary,
    pub matrix: DocTermMatrix,
    pub dropped: Vec<DroppedDoc>,
}

/// Prunes the vocabulary by document frequency and counts retained lemmas.
///
/// Pruning and the short-document filter are applied together until neither
/// removes anything, so the final vocabulary satisfies the df bounds with
/// respect to the documents that are actually kept.
pub fn build_matrix(docs: &[NormalizedDoc], cfg: &MatrixConfig) -> Result<MatrixBuild, CorpusError> {
    cfg.validate()?;
    let empty = || CorpusError::EmptyVocabulary { min_df: cfg.min_df, max_df_fraction: cfg.max_df_fraction };

    let mut active: Vec<usize> = (0..docs.len()).collect();
    let mut dropped = Vec::new();
    let (terms, dfs) = loop {
        if active.is_empty() {
            return Err(empty());
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for &d in &active {
            let mut uniq: Vec<&str> = docs[d].lemmas.iter().map(String::as_str).collect();
            uniq.sort_unstable();
            uniq.dedup();
            for l in uniq {
                *df.entry(l).or_default() += 1;
            }
        }
        let max_df = cfg.max_df_fraction * active.len() as f64;
        let retained: BTreeMap<&str, usize> =
            df.into_iter().filter(|&(_, n)| n >= cfg.min_df && n as f64 <= max_df).collect();

        let mut next = Vec::with_capacity(active.len());
        let mut removed = false;
        for &d in &active {
            let kept = docs[d].lemmas.iter().filter(|l| retained.contains_key(l.as_str())).count();
            if kept < cfg.min_doc_tokens {
                log::info!(
                    "dropping document {} ({}): {kept} retained tokens < {}",
                    docs[d].id,
                    docs[d].year,
                    cfg.min_doc_tokens
                );
                dropped.push(DroppedDoc { id: docs[d].id.clone(), year: docs[d].year, retained_tokens: kept });
                removed = true;
            } else {
                next.push(d);
            }
        }
        active = next;
        if !removed {
            let terms: Vec<String> = retained.keys().map(|s| s.to_string()).collect();
            let dfs: Vec<usize> = retained.values().copied().collect();
            break (terms, dfs);
        }
    };
    if terms.is_empty() {
        return Err(empty());
    }

    let vocabulary = Vocabulary::new(terms, dfs);
    let rows = active
        .iter()
        .map(|&d| {
            let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
            for l in &docs[d].lemmas {
                if let Some(t) = vocabulary.index_of(l) {
                    *counts.entry(t).or_default() += 1;
                }
            }
            counts.into_iter().collect()
        })
        .collect();
    let matrix = DocTermMatrix {
        rows,
        terms: vocabulary.terms.clone(),
        doc_ids: active.iter().map(|&d| docs[d].id.clone()).collect(),
        doc_years: active.iter().map(|&d| docs[d].year).collect(),
    };
    Ok(MatrixBuild { vocabulary, matrix, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(lists: &[&[&str]]) -> Vec<NormalizedDoc> {
        lists
            .iter()
            .enumerate()
            .map(|(i, l)| NormalizedDoc {
                id: format!("d{i}"),
                year: 1700 + i as i32,
                lemmas: l.iter().map(|s| s.to_string()).collect(),
            })
            .collect()
    }

    fn dense(m: &DocTermMatrix) -> Vec<Vec<u32>> {
        (0..m.n_docs())
            .map(|d| {
                let mut row = vec![0; m.n_terms()];
                for &(t, c) in m.row(d) {
                    row[t] = c;
                }
                row
            })
            .collect()
    }

    #[test]
    fn small_matrix_counts() {
        let cfg = MatrixConfig { min_df: 1, max_df_fraction: 1.0, min_doc_tokens: 1 };
        let b = build_matrix(&docs(&[&["a", "b"], &["b", "c"]]), &cfg).unwrap();
        assert_eq!(b.vocabulary.terms(), ["a", "b", "c"]);
        assert_eq!(dense(&b.matrix), vec![vec![1, 1, 0], vec![0, 1, 1]]);
        assert_eq!(b.vocabulary.document_frequency(), [1, 2, 1]);
    }

    #[test]
    fn min_df_prunes() {
        let cfg = MatrixConfig { min_df: 2, max_df_fraction: 1.0, min_doc_tokens: 1 };
        let b = build_matrix(&docs(&[&["a", "b"], &["b", "c"]]), &cfg).unwrap();
        assert_eq!(b.vocabulary.terms(), ["b"]);
        assert_eq!(dense(&b.matrix), vec![vec![1], vec![1]]);
    }

    #[test]
    fn empty_vocabulary_is_error() {
        let cfg = MatrixConfig { min_df: 3, max_df_fraction: 1.0, min_doc_tokens: 1 };
        assert!(matches!(
            build_matrix(&docs(&[&["a"], &["b"]]), &cfg),
            Err(CorpusError::EmptyVocabulary { .. })
        ));
    }

    #[test]
    fn short_documents_are_dropped_and_reported() {
        let cfg = MatrixConfig { min_df: 1, max_df_fraction: 1.0, min_doc_tokens: 3 };
        let b = build_matrix(&docs(&[&["a", "a", "b"], &["b"], &["a", "b", "b"]]), &cfg).unwrap();
        assert_eq!(b.matrix.doc_ids(), ["d0", "d2"]);
        assert_eq!(b.matrix.doc_years(), [1700, 1702]);
        assert_eq!(b.dropped, vec![DroppedDoc { id: "d1".into(), year: 1701, retained_tokens: 1 }]);
    }

    #[test]
    fn invalid_config_rejected() {
        let d = docs(&[&["a"]]);
        assert!(build_matrix(&d, &MatrixConfig { min_df: 0, ..Default::default() }).is_err());
        assert!(build_matrix(&d, &MatrixConfig { max_df_fraction: 0.0, ..Default::default() }).is_err());
        assert!(build_matrix(&d, &MatrixConfig { max_df_fraction: 1.5, ..Default::default() }).is_err());
    }

    #[test]
    fn triplets_round_trip() {
        let cfg = MatrixConfig { min_df: 1, max_df_fraction: 1.0, min_doc_tokens: 1 };
        let b = build_matrix(&docs(&[&["a", "b", "b"], &["c", "b"]]), &cfg).unwrap();
        let mut buf = Vec::new();
        b.matrix.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 3 4\n0 0 1\n0 1 2\n"));
        let back = DocTermMatrix::read_triplets(
            &buf[..],
            b.matrix.terms().to_vec(),
            b.matrix.doc_ids().to_vec(),
            b.matrix.doc_years().to_vec(),
        )
        .unwrap();
        assert_eq!(back, b.matrix);
    }

    #[test]
    fn triplet_header_mismatch_rejected() {
        let r = DocTermMatrix::read_triplets(&b"1 2 1\n0 0 1\n"[..], vec!["a".into()], vec!["d".into()], vec![1700]);
        assert!(matches!(r, Err(CorpusError::MatrixFormat { line: 1, .. })));
    }
}
