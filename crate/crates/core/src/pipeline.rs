//! File-based pipeline stages.
//!
//! Every stage reads the artifacts written by earlier stages from the output
//! directory and writes its own, so any stage can be rerun on its own. Model
//! dependent artifacts live in one subdirectory per method (`lda/`, `nmf/`).
//! After each stage `run_manifest.json` records the resolved configuration
//! and the SHA-256 of every file the stage read and wrote.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::align::{self, AlignError, AlignOptions, LoadOptions, Normalization};
use crate::config::{ConfigError, PipelineConfig, Source, BUILTIN_LEXICON};
use crate::corpus::{
    self, build_matrix, filter_years, load_local_corpus, normalize_all, write_corpus, CorpusError, DocTermMatrix,
    FetchOptions, HttpTransport, LemmaProvider, LexiconLemmatizer, PreAnnotated,
};
use crate::divergence::{self, jsd_series, rolling_mean, Aggregation, DivergenceError, YearlyTopicSeries};
use crate::lda::{self, LdaError};
use crate::model::{Method, ModelError, TopicModel};
use crate::nmf::{self, NmfError};
use crate::plot::{LineChart, ScatterChart, ScatterPoint, Series};
use crate::semmap::{self, SemmapError};
use crate::trends::{self, TrendError};

pub const CORPUS: &str = "corpus.jsonl";
pub const VOCAB: &str = "vocab.txt";
pub const DTM: &str = "dtm.txt";
pub const DOCUMENTS: &str = "documents.csv";
pub const DROPPED: &str = "dropped_documents.csv";
pub const MANIFEST: &str = "run_manifest.json";
/// Manifest key prefix for inputs resolved against the config directory.
pub const CONFIG_INPUT_PREFIX: &str = "config:";

pub const MODEL: &str = "model.json";
pub const THETA: &str = "theta.csv";
pub const TOP_WORDS: &str = "phi_top_words.csv";
pub const YEARLY: &str = "yearly_prevalence.csv";
pub const TRENDS: &str = "trends.csv";
pub const JSD: &str = "jsd.csv";
pub const MDS_COORDS: &str = "mds_coords.csv";
pub const MDS_LABELS: &str = "mds_labels.csv";
pub const MDS_EIGENVALUES: &str = "mds_eigenvalues.csv";
pub const OVERLAY: &str = "overlay.csv";
pub const TOPIC_TABLE: &str = "topic_table.csv";
pub const REPORT_TABLE: &str = "report/topic_table.md";
pub const REPORT_PREVALENCE: &str = "report/prevalence.svg";
pub const REPORT_JSD: &str = "report/jsd.svg";
pub const REPORT_MAP: &str = "report/semantic_map.svg";
pub const REPORT_OVERLAY: &str = "report/overlay.svg";

const MANIFEST_VERSION: u32 = 1;
/// Width in years of the period groups colored on the semantic map.
const MAP_PERIOD_YEARS: i32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Preprocess,
    Fit,
    Trends,
    Divergence,
    Map,
    Align,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Fit,
        Stage::Trends,
        Stage::Divergence,
        Stage::Map,
        Stage::Align,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Fit => "fit",
            Stage::Trends => "trends",
            Stage::Divergence => "divergence",
            Stage::Map => "map",
            Stage::Align => "align",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Nmf(#[from] NmfError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Trend(#[from] TrendError),
    #[error(transparent)]
    Semmap(#[from] SemmapError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("missing {}: run {stage} first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
}

type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_owned(), source }
}

fn artifact_err(path: &Path) -> impl FnOnce(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::Artifact { path: path.to_owned(), message: e.to_string() }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(io_err(path))?))
}

/// Files read and written by one stage, keyed by path, valued by SHA-256.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Artifact { path: path.to_owned(), message: e.to_string() })
    }
}

/// Metadata rows of `documents.csv`, in matrix order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocTable {
    pub ids: Vec<String>,
    pub years: Vec<i32>,
    pub titles: Vec<String>,
    pub tokens: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocRow {
    doc_id: String,
    year: i32,
    title: String,
    tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub topic: usize,
    pub mean_prevalence: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub delta: f64,
    pub classification: trends::Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsdRow {
    pub year_from: i32,
    pub year_to: i32,
    pub jsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordRow {
    pub doc_id: String,
    pub year: i32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub topic: usize,
    pub label: String,
    pub x: f64,
    pub y: f64,
    /// Representative document ids separated by ';'.
    pub documents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub topic: usize,
    pub year: i32,
    pub prevalence: f64,
    pub external: f64,
    pub prevalence_normalized: f64,
    pub external_normalized: f64,
    pub interpolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTableRow {
    pub topic: usize,
    pub label: String,
    pub classification: trends::Classification,
    pub mean_prevalence: f64,
    pub delta: f64,
    pub p_value: f64,
    pub top_words: String,
    pub representative_docs: String,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(artifact_err(path))?;
    rdr.deserialize().collect::<csv::Result<Vec<T>>>().map_err(artifact_err(path))
}

/// Serializes `rows` under an explicit header, so empty tables keep their columns.
fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

fn records_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.write_record(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub struct Pipeline {
    config: PipelineConfig,
    base_dir: PathBuf,
    out_dir: PathBuf,
}

impl Pipeline {
    /// Validates `config`; relative paths in it resolve against `base_dir`.
    pub fn new(config: PipelineConfig, base_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Result<Self> {
        let base_dir = base_dir.into();
        config.validate(&base_dir)?;
        Ok(Pipeline { config, base_dir, out_dir: out_dir.into() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn methods(&self) -> Vec<Method> {
        self.config.model.method.methods()
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        log::info!("stage {stage}");
        let mut rec = StageRecord::default();
        match stage {
            Stage::Ingest => self.ingest(&mut rec)?,
            Stage::Preprocess => self.preprocess(&mut rec)?,
            Stage::Fit => self.fit(&mut rec)?,
            Stage::Trends => self.trends(&mut rec)?,
            Stage::Divergence => self.divergence(&mut rec)?,
            Stage::Map => self.map(&mut rec)?,
            Stage::Align => self.align(&mut rec)?,
            Stage::Report => self.report(&mut rec)?,
        }
        self.update_manifest(stage, rec)
    }

    pub fn run_all(&self) -> Result<()> {
        Stage::ALL.iter().try_for_each(|&s| self.run(s))
    }

    fn resolve(&self, p: impl AsRef<Path>) -> PathBuf {
        self.base_dir.join(p)
    }

    fn input(&self, rec: &mut StageRecord, rel: &str, producer: Stage) -> Result<PathBuf> {
        let path = self.out_dir.join(rel);
        if !path.is_file() {
            return Err(PipelineError::MissingArtifact { path, stage: producer.name() });
        }
        rec.inputs.insert(rel.to_owned(), sha256_file(&path)?);
        Ok(path)
    }

    /// Inputs outside the output directory are keyed `config:<path>`, with
    /// the path relative to the config file as written.
    fn external_input(&self, rec: &mut StageRecord, written: &Path) -> Result<PathBuf> {
        let path = self.resolve(written);
        rec.inputs.insert(format!("{CONFIG_INPUT_PREFIX}{}", written.display()), sha256_file(&path)?);
        Ok(path)
    }

    fn output_path(&self, rel: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        Ok(path)
    }

    fn output(&self, rec: &mut StageRecord, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.output_path(rel)?;
        fs::write(&path, bytes).map_err(io_err(&path))?;
        rec.outputs.insert(rel.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    fn record_output(&self, rec: &mut StageRecord, rel: &str) -> Result<()> {
        let hash = sha256_file(&self.out_dir.join(rel))?;
        rec.outputs.insert(rel.to_owned(), hash);
        Ok(())
    }

    fn update_manifest(&self, stage: Stage, rec: StageRecord) -> Result<()> {
        let path = self.output_path(MANIFEST)?;
        let mut stages = if path.is_file() {
            match RunManifest::load(&path) {
                Ok(m) => m.stages,
                Err(e) => {
                    log::warn!("replacing unreadable manifest: {e}");
                    BTreeMap::new()
                }
            }
        } else {
            BTreeMap::new()
        };
        stages.insert(stage.name().to_owned(), rec);
        let resolved = self.config.resolved();
        let manifest = RunManifest {
            format_version: MANIFEST_VERSION,
            seed: self.config.seed(),
            config: serde_json::to_value(&resolved).expect("config serializes"),
            stages,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))
    }

    fn ingest(&self, rec: &mut StageRecord) -> Result<()> {
        let c = &self.config.corpus;
        let docs = match c.source {
            Source::Local => {
                let written = c.path.as_deref().expect("validated: local source has a path");
                let path = self.external_input(rec, written)?;
                load_local_corpus(path)?
            }
            Source::Api => {
                let opts = FetchOptions {
                    concurrency: c.concurrency,
                    retries: c.retries,
                    year_range: Some((c.year_start, c.year_end)),
                    ..Default::default()
                };
                let transport = HttpTransport::new()?;
                let base = c.api_base.trim_end_matches('/');
                rec.inputs.insert(format!("{base}/corpora/{}", c.name), "remote".into());
                corpus::fetch_corpus_with(&transport, base, &c.name, &self.resolve(&c.cache_dir), &opts)?
            }
        };
        let total = docs.len();
        let docs = filter_years(docs, c.year_start, c.year_end);
        if docs.is_empty() {
            return Err(CorpusError::Config(format!(
                "no documents between {} and {} ({total} before filtering)",
                c.year_start, c.year_end
            ))
            .into());
        }
        log::info!("ingest: {} of {total} documents in {}-{}", docs.len(), c.year_start, c.year_end);
        write_corpus(self.output_path(CORPUS)?, &docs)?;
        self.record_output(rec, CORPUS)
    }

    fn lemmatizer(&self, rec: &mut StageRecord) -> Result<Option<Box<dyn LemmaProvider>>> {
        let c = &self.config.corpus;
        if let Some(p) = &c.annotations {
            let path = self.external_input(rec, p)?;
            return Ok(Some(Box::new(PreAnnotated::from_jsonl(path)?)));
        }
        match c.lexicon.as_deref() {
            None => Ok(None),
            Some(BUILTIN_LEXICON) => Ok(Some(Box::new(LexiconLemmatizer::seed(c.unknown_pos.clone())))),
            Some(p) => {
                let path = self.external_input(rec, Path::new(p))?;
                let mut lex = LexiconLemmatizer::from_path(path, c.unknown_pos.clone())?;
                lex.extend_from(LexiconLemmatizer::seed(c.unknown_pos.clone()));
                Ok(Some(Box::new(lex)))
            }
        }
    }

    fn preprocess(&self, rec: &mut StageRecord) -> Result<()> {
        let docs = load_local_corpus(self.input(rec, CORPUS, Stage::Ingest)?)?;
        let norm = self.config.normalizer_config(&self.base_dir)?;
        let lemmatizer = self.lemmatizer(rec)?;
        let normalized = normalize_all(&docs, &norm, lemmatizer.as_deref())?;
        let build = build_matrix(&normalized, &self.config.matrix_config())?;
        let m = &build.matrix;
        log::info!(
            "preprocess: {} documents x {} terms, {} tokens, {} dropped",
            m.n_docs(),
            m.n_terms(),
            m.total_tokens(),
            build.dropped.len()
        );

        let titles: BTreeMap<&str, &str> = docs.iter().map(|d| (d.id.as_str(), d.title.as_str())).collect();
        let mut vocab = String::new();
        for t in m.terms() {
            vocab.push_str(t);
            vocab.push('\n');
        }
        self.output(rec, VOCAB, vocab.as_bytes())?;
        let mut dtm = Vec::new();
        m.write_triplets(&mut dtm).map_err(io_err(&self.out_dir.join(DTM)))?;
        self.output(rec, DTM, &dtm)?;

        let rows: Vec<DocRow> = (0..m.n_docs())
            .map(|d| DocRow {
                doc_id: m.doc_ids()[d].clone(),
                year: m.doc_years()[d],
                title: titles.get(m.doc_ids()[d].as_str()).copied().unwrap_or_default().to_owned(),
                tokens: m.doc_total(d),
            })
            .collect();
        self.output(rec, DOCUMENTS, &csv_bytes(&["doc_id", "year", "title", "tokens"], &rows))?;
        let dropped: Vec<Vec<String>> = build
            .dropped
            .iter()
            .map(|d| {
                vec![
                    d.id.clone(),
                    d.year.to_string(),
                    titles.get(d.id.as_str()).copied().unwrap_or_default().to_owned(),
                    d.retained_tokens.to_string(),
                ]
            })
            .collect();
        let header = ["doc_id", "year", "title", "retained_tokens"].map(String::from);
        self.output(rec, DROPPED, &records_bytes(&header, &dropped))
    }

    fn load_docs(&self, rec: &mut StageRecord) -> Result<DocTable> {
        let rows: Vec<DocRow> = read_csv(&self.input(rec, DOCUMENTS, Stage::Preprocess)?)?;
        let mut t = DocTable::default();
        for r in rows {
            t.ids.push(r.doc_id);
            t.years.push(r.year);
            t.titles.push(r.title);
            t.tokens.push(r.tokens);
        }
        Ok(t)
    }

    fn load_matrix(&self, rec: &mut StageRecord) -> Result<(DocTermMatrix, DocTable)> {
        let vocab_path = self.input(rec, VOCAB, Stage::Preprocess)?;
        let terms: Vec<String> =
            fs::read_to_string(&vocab_path).map_err(io_err(&vocab_path))?.lines().map(str::to_owned).collect();
        let docs = self.load_docs(rec)?;
        let dtm_path = self.input(rec, DTM, Stage::Preprocess)?;
        let file = fs::File::open(&dtm_path).map_err(io_err(&dtm_path))?;
        let m = DocTermMatrix::read_triplets(BufReader::new(file), terms, docs.ids.clone(), docs.years.clone())?;
        Ok((m, docs))
    }

    fn fit(&self, rec: &mut StageRecord) -> Result<()> {
        let (matrix, _) = self.load_matrix(rec)?;
        for method in self.methods() {
            let model = match method {
                Method::Lda => {
                    let cfg = self.config.lda_config();
                    let mut model = lda::fit_lda(&matrix, &cfg)?;
                    let perplexity = lda::perplexity(&model, &matrix)?;
                    log::info!("lda: K={} perplexity {perplexity:.2}", cfg.topics);
                    if let Some(d) = model.diagnostics.as_object_mut() {
                        d.insert("perplexity".into(), perplexity.into());
                    }
                    model
                }
                Method::Nmf => {
                    let cfg = self.config.nmf_config();
                    let v = nmf::weight_matrix(&matrix, cfg.weighting);
                    let fit = nmf::fit_nmf(&v, &cfg)?;
                    log::info!(
                        "nmf: K={} {} iterations, objective {:.6e}, converged {}",
                        cfg.topics,
                        fit.iterations(),
                        fit.objective_trace.last().copied().unwrap_or(f64::NAN),
                        fit.converged
                    );
                    nmf::into_topic_model(&fit, &matrix, &cfg)
                }
            };
            let rel = format!("{method}/{MODEL}");
            model.save_json(self.output_path(&rel)?)?;
            self.record_output(rec, &rel)?;
            let mut theta = Vec::new();
            model.write_theta_csv(&mut theta).map_err(artifact_err(Path::new(THETA)))?;
            self.output(rec, &format!("{method}/{THETA}"), &theta)?;
            let mut top = Vec::new();
            model
                .write_top_words_csv(&mut top, self.config.analysis.top_words)
                .map_err(artifact_err(Path::new(TOP_WORDS)))?;
            self.output(rec, &format!("{method}/{TOP_WORDS}"), &top)?;
        }
        Ok(())
    }

    fn load_model(&self, rec: &mut StageRecord, method: Method) -> Result<(TopicModel, DocTable)> {
        let docs = self.load_docs(rec)?;
        let path = self.input(rec, &format!("{method}/{MODEL}"), Stage::Fit)?;
        let model = TopicModel::load_json(&path)?;
        if model.doc_ids != docs.ids {
            return Err(PipelineError::Artifact {
                path,
                message: format!("documents differ from {DOCUMENTS}; run `fit` again"),
            });
        }
        Ok((model, docs))
    }

    fn yearly(&self, model: &TopicModel, docs: &DocTable) -> Result<YearlyTopicSeries> {
        Ok(match self.config.analysis.aggregation {
            Aggregation::Unweighted => divergence::yearly_distributions(model.theta.view(), &model.doc_years)?,
            Aggregation::TokenWeighted => {
                let w: Vec<f64> = docs.tokens.iter().map(|&t| t as f64).collect();
                divergence::yearly_distributions_weighted(model.theta.view(), &model.doc_years, &w)?
            }
        })
    }

    fn trends(&self, rec: &mut StageRecord) -> Result<()> {
        let period = self.config.period();
        for method in self.methods() {
            let (model, docs) = self.load_model(rec, method)?;
            let series = self.yearly(&model, &docs)?;
            let k = series.n_topics();

            let mut header = vec!["year".to_string(), "n_docs".to_string()];
            header.extend((0..k).map(|t| format!("topic_{t}")));
            let rows: Vec<Vec<String>> = series
                .years
                .iter()
                .zip(&series.distributions)
                .zip(&series.doc_counts)
                .map(|((y, p), n)| {
                    let mut r = vec![y.to_string(), n.to_string()];
                    r.extend(p.as_slice().iter().map(f64::to_string));
                    r
                })
                .collect();
            self.output(rec, &format!("{method}/{YEARLY}"), &records_bytes(&header, &rows))?;

            let in_period = restrict(&series, period);
            let results = trends::topic_trends(&in_period, period, &self.config.classify_rule())?;
            let rows: Vec<TrendRow> = results
                .into_iter()
                .map(|r| TrendRow {
                    topic: r.topic,
                    mean_prevalence: r.mean_prevalence,
                    slope: r.slope,
                    slope_stderr: r.slope_stderr,
                    t_statistic: r.t_statistic,
                    p_value: r.p_value,
                    delta: r.delta,
                    classification: r.classification,
                })
                .collect();
            for r in &rows {
                log::info!("{method} topic {}: {} (delta {:+.3}, p {:.3e})", r.topic, r.classification, r.delta, r.p_value);
            }
            let header =
                ["topic", "mean_prevalence", "slope", "slope_stderr", "t_statistic", "p_value", "delta", "classification"];
            self.output(rec, &format!("{method}/{TRENDS}"), &csv_bytes(&header, &rows))?;
        }
        Ok(())
    }

    fn divergence(&self, rec: &mut StageRecord) -> Result<()> {
        for method in self.methods() {
            let (model, docs) = self.load_model(rec, method)?;
            let series = self.yearly(&model, &docs)?;
            let js = jsd_series(&series)?;
            if let Some(i) = js.argmax() {
                let (a, b) = js.year_pairs[i];
                log::info!("{method}: largest JSD {:.4} bits between {a} and {b}", js.values[i]);
            }
            let rows: Vec<JsdRow> = js
                .year_pairs
                .iter()
                .zip(&js.values)
                .map(|(&(year_from, year_to), &jsd)| JsdRow { year_from, year_to, jsd })
                .collect();
            self.output(rec, &format!("{method}/{JSD}"), &csv_bytes(&["year_from", "year_to", "jsd"], &rows))?;
        }
        Ok(())
    }

    fn topic_labels(&self, model: &TopicModel) -> Result<Vec<(usize, String)>> {
        let labels = &self.config.analysis.labels;
        if !labels.is_empty() {
            return Ok(labels.iter().map(|l| (l.topic, l.text.clone())).collect());
        }
        (0..model.n_topics())
            .map(|k| {
                let words: Vec<String> = lda::top_words(model, k, 3)?.into_iter().map(|(w, _)| w).collect();
                Ok((k, format!("{k}: {}", words.join(" "))))
            })
            .collect()
    }

    fn map(&self, rec: &mut StageRecord) -> Result<()> {
        for method in self.methods() {
            let (model, _) = self.load_model(rec, method)?;
            let coords = semmap::semantic_map(&model)?;
            let n = self.config.analysis.representative_docs.min(model.n_docs());
            let coords = semmap::place_labels(coords, &model, &self.topic_labels(&model)?, n)?;

            let rows: Vec<CoordRow> = (0..coords.doc_ids.len())
                .map(|d| CoordRow {
                    doc_id: coords.doc_ids[d].clone(),
                    year: model.doc_years[d],
                    x: coords.xy[[d, 0]],
                    y: coords.xy[[d, 1]],
                })
                .collect();
            self.output(rec, &format!("{method}/{MDS_COORDS}"), &csv_bytes(&["doc_id", "year", "x", "y"], &rows))?;
            let labels: Vec<LabelRow> = coords
                .labels
                .iter()
                .map(|l| LabelRow { topic: l.topic, label: l.text.clone(), x: l.x, y: l.y, documents: l.doc_ids.join(";") })
                .collect();
            let header = ["topic", "label", "x", "y", "documents"];
            self.output(rec, &format!("{method}/{MDS_LABELS}"), &csv_bytes(&header, &labels))?;
            let header = ["rank".to_string(), "eigenvalue".to_string()];
            let eig: Vec<Vec<String>> =
                coords.eigenvalues.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]).collect();
            self.output(rec, &format!("{method}/{MDS_EIGENVALUES}"), &records_bytes(&header, &eig))?;
        }
        Ok(())
    }

    fn align(&self, rec: &mut StageRecord) -> Result<()> {
        let Some(ext_cfg) = &self.config.external else {
            log::warn!("align: no [external] series configured, skipping");
            return Ok(());
        };
        let path = self.external_input(rec, &ext_cfg.path)?;
        let load = LoadOptions {
            year_column: ext_cfg.year_column.clone(),
            value_column: ext_cfg.value_column.clone(),
            filter: ext_cfg.country_column.clone().zip(ext_cfg.country.clone()),
            name: ext_cfg.name.clone(),
            unit: ext_cfg.unit.clone(),
        };
        let external = align::load_series(path, &load)?;
        let raw_opts = AlignOptions { normalization: Normalization::None, interpolate: ext_cfg.interpolate };
        let opts = AlignOptions { normalization: ext_cfg.normalization, interpolate: ext_cfg.interpolate };
        for method in self.methods() {
            let (model, docs) = self.load_model(rec, method)?;
            let series = self.yearly(&model, &docs)?;
            let topics = if ext_cfg.overlay_topics.is_empty() {
                (0..series.n_topics()).collect()
            } else {
                ext_cfg.overlay_topics.clone()
            };
            let mut rows = Vec::new();
            for k in topics {
                let points = trends::topic_prevalence_series(&series, k)?;
                let raw = align::align(&points, &external, &raw_opts)?;
                let norm = align::align(&points, &external, &opts)?;
                for i in 0..raw.years.len() {
                    rows.push(OverlayRow {
                        topic: k,
                        year: raw.years[i],
                        prevalence: raw.topic_values[i],
                        external: raw.external_values[i],
                        prevalence_normalized: norm.topic_values[i],
                        external_normalized: norm.external_values[i],
                        interpolated: raw.interpolated[i],
                    });
                }
            }
            let header = [
                "topic",
                "year",
                "prevalence",
                "external",
                "prevalence_normalized",
                "external_normalized",
                "interpolated",
            ];
            self.output(rec, &format!("{method}/{OVERLAY}"), &csv_bytes(&header, &rows))?;
        }
        Ok(())
    }

    fn report(&self, rec: &mut StageRecord) -> Result<()> {
        for method in self.methods() {
            let (model, docs) = self.load_model(rec, method)?;
            let dir = |name: &str| format!("{method}/{name}");
            let trend_rows: Vec<TrendRow> = read_csv(&self.input(rec, &dir(TRENDS), Stage::Trends)?)?;
            let jsd_rows: Vec<JsdRow> = read_csv(&self.input(rec, &dir(JSD), Stage::Divergence)?)?;
            let coord_rows: Vec<CoordRow> = read_csv(&self.input(rec, &dir(MDS_COORDS), Stage::Map)?)?;
            let label_rows: Vec<LabelRow> = read_csv(&self.input(rec, &dir(MDS_LABELS), Stage::Map)?)?;
            let yearly_path = self.input(rec, &dir(YEARLY), Stage::Trends)?;
            let overlay_rows: Option<Vec<OverlayRow>> = match self.config.external {
                Some(_) => Some(read_csv(&self.input(rec, &dir(OVERLAY), Stage::Align)?)?),
                None => None,
            };

            let label_of: BTreeMap<usize, String> = label_rows.iter().map(|l| (l.topic, l.label.clone())).collect();
            let name_of = |k: usize| label_of.get(&k).cloned().unwrap_or_else(|| format!("topic {k}"));
            let n_rep = self.config.analysis.representative_docs.min(model.n_docs());
            let mut table = Vec::new();
            for t in &trend_rows {
                let words: Vec<String> = lda::top_words(&model, t.topic, self.config.analysis.top_words)?
                    .into_iter()
                    .map(|(w, _)| w)
                    .collect();
                let reps = semmap::representative_docs(&model, t.topic, n_rep)?;
                table.push(TopicTableRow {
                    topic: t.topic,
                    label: name_of(t.topic),
                    classification: t.classification,
                    mean_prevalence: t.mean_prevalence,
                    delta: t.delta,
                    p_value: t.p_value,
                    top_words: words.join(" "),
                    representative_docs: reps.join(";"),
                });
            }
            let header = [
                "topic",
                "label",
                "classification",
                "mean_prevalence",
                "delta",
                "p_value",
                "top_words",
                "representative_docs",
            ];
            self.output(rec, &dir(TOPIC_TABLE), &csv_bytes(&header, &table))?;
            self.output(rec, &dir(REPORT_TABLE), markdown_table(method, &table, &docs).as_bytes())?;

            let (years, prevalence) = read_yearly(&yearly_path)?;
            let mut chart = LineChart::new(format!("Topic prevalence by year ({method})"), "year", "mean share");
            for (k, values) in prevalence.iter().enumerate() {
                let pts = years.iter().zip(values).map(|(&y, &v)| (y as f64, v)).collect();
                chart.series.push(Series::new(name_of(k), pts));
            }
            self.output(rec, &dir(REPORT_PREVALENCE), chart.to_svg().as_bytes())?;

            let mut chart = LineChart::new(format!("Year-to-year Jensen-Shannon divergence ({method})"), "year", "JSD (bits)");
            let pts: Vec<(f64, f64)> = jsd_rows.iter().map(|r| (r.year_to as f64, r.jsd)).collect();
            chart.series.push(Series::new("JSD", pts.clone()));
            let window = self.config.analysis.jsd_smoothing_window;
            if window > 1 {
                let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
                let smooth = pts.iter().zip(rolling_mean(&values, window)).map(|(p, v)| (p.0, v)).collect();
                chart.series.push(Series { dashed: true, ..Series::new(format!("{window}-pair mean"), smooth) });
            }
            self.output(rec, &dir(REPORT_JSD), chart.to_svg().as_bytes())?;

            let (start, end) = self.config.period();
            let mut map = ScatterChart::new(format!("Semantic map ({method})"));
            map.points = coord_rows
                .iter()
                .map(|r| ScatterPoint {
                    x: r.x,
                    y: r.y,
                    group: ((r.year.clamp(start, end) - start) / MAP_PERIOD_YEARS) as usize,
                })
                .collect();
            let n_groups = ((end - start) / MAP_PERIOD_YEARS + 1) as usize;
            map.group_names = (0..n_groups)
                .map(|g| {
                    let a = start + g as i32 * MAP_PERIOD_YEARS;
                    format!("{a}-{}", (a + MAP_PERIOD_YEARS - 1).min(end))
                })
                .collect();
            map.labels = label_rows.iter().map(|l| (l.label.clone(), l.x, l.y)).collect();
            self.output(rec, &dir(REPORT_MAP), map.to_svg().as_bytes())?;

            if let (Some(rows), Some(ext)) = (overlay_rows, &self.config.external) {
                let mut chart = LineChart::new(
                    format!("Topic prevalence and {} ({method})", ext.name),
                    "year",
                    "normalized value",
                );
                let mut topics: Vec<usize> = rows.iter().map(|r| r.topic).collect();
                topics.dedup();
                for &k in &topics {
                    let pts = rows.iter().filter(|r| r.topic == k).map(|r| (r.year as f64, r.prevalence_normalized));
                    chart.series.push(Series::new(name_of(k), pts.collect()));
                }
                if let Some(&first) = topics.first() {
                    let pts = rows.iter().filter(|r| r.topic == first).map(|r| (r.year as f64, r.external_normalized));
                    chart.series.push(Series { dashed: true, ..Series::new(format!("{} ({})", ext.name, ext.unit), pts.collect()) });
                }
                self.output(rec, &dir(REPORT_OVERLAY), chart.to_svg().as_bytes())?;
            }
        }
        Ok(())
    }
}

/// Keeps the years inside `period` (inclusive).
fn restrict(series: &YearlyTopicSeries, period: (i32, i32)) -> YearlyTopicSeries {
    let keep: Vec<usize> = (0..series.len()).filter(|&i| (period.0..=period.1).contains(&series.years[i])).collect();
    YearlyTopicSeries {
        years: keep.iter().map(|&i| series.years[i]).collect(),
        distributions: keep.iter().map(|&i| series.distributions[i].clone()).collect(),
        doc_counts: keep.iter().map(|&i| series.doc_counts[i]).collect(),
    }
}

/// Years and one value column per topic from `yearly_prevalence.csv`.
fn read_yearly(path: &Path) -> Result<(Vec<i32>, Vec<Vec<f64>>)> {
    let bad = |message: String| PipelineError::Artifact { path: path.to_owned(), message };
    let mut rdr = csv::Reader::from_path(path).map_err(artifact_err(path))?;
    let k = rdr.headers().map_err(artifact_err(path))?.iter().filter(|h| h.starts_with("topic_")).count();
    let mut years = Vec::new();
    let mut values = vec![Vec::new(); k];
    for rec in rdr.records() {
        let rec = rec.map_err(artifact_err(path))?;
        years.push(rec[0].parse().map_err(|_| bad(format!("bad year \"{}\"", &rec[0])))?);
        for (t, col) in values.iter_mut().enumerate() {
            let cell = rec.get(2 + t).unwrap_or("");
            col.push(cell.parse().map_err(|_| bad(format!("bad value \"{cell}\"")))?);
        }
    }
    Ok((years, values))
}

fn markdown_table(method: Method, rows: &[TopicTableRow], docs: &DocTable) -> String {
    let title: BTreeMap<&str, &str> = docs.ids.iter().map(String::as_str).zip(docs.titles.iter().map(String::as_str)).collect();
    let cell = |s: &str| s.replace('|', "\\|");
    let mut out = format!("# Topics ({method})\n\n");
    out.push_str("| topic | label | trend | delta | p-value | mean share | top words | representative plays |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let plays: Vec<String> = r
            .representative_docs
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|id| title.get(id).filter(|t| !t.is_empty()).map_or(id.to_owned(), |t| format!("{t} ({id})")))
            .collect();
        out.push_str(&format!(
            "| {} | {} | {} | {:+.3} | {:.2e} | {:.3} | {} | {} |\n",
            r.topic,
            cell(&r.label),
            r.classification,
            r.delta,
            r.p_value,
            r.mean_prevalence,
            cell(&r.top_words),
            cell(&plays.join("; "))
        ));
    }
    out
}
