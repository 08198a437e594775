//! Pipeline configuration, read from a TOML file.
//!
//! Relative paths inside the file are resolved against the directory that
//! contains it. Every section except `[corpus]` is optional; missing keys
//! take the defaults documented on each field. See `data/sample/config.toml`
//! for a complete example.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::Normalization;
use crate::corpus::normalize::read_word_list;
use crate::corpus::{CorpusError, MatrixConfig, NormalizerConfig};
use crate::divergence::Aggregation;
use crate::lda::LdaConfig;
use crate::model::Method;
use crate::nmf::{NmfConfig, Weighting};
use crate::trends::ClassifyRule;

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_API_BASE: &str = "https://dracor.org/api/v1";
pub const DEFAULT_SEED: u64 = 0;
/// Value of `corpus.lexicon` selecting the bundled seed lexicon.
pub const BUILTIN_LEXICON: &str = "builtin";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Api,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    #[default]
    Lda,
    Nmf,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Lda => vec![Method::Lda],
            MethodChoice::Nmf => vec![Method::Nmf],
            MethodChoice::Both => vec![Method::Lda, Method::Nmf],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PipelineConfig {
    pub config_version: u32,
    /// Seed for every stochastic step; 0 when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub normalizer: NormalizerSection,
    #[serde(default)]
    pub matrix: MatrixSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub external: Option<ExternalSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct CorpusSection {
    pub source: Source,
    /// JSONL corpus for `source = "local"`.
    pub path: Option<PathBuf>,
    pub api_base: String,
    pub name: String,
    pub cache_dir: PathBuf,
    pub concurrency: usize,
    pub retries: u32,
    pub year_start: i32,
    pub year_end: i32,
    /// Lexicon TSV for raw-text documents, or "builtin".
    pub lexicon: Option<String>,
    /// Pre-annotated tokens (JSONL keyed by document id) for raw-text documents.
    pub annotations: Option<PathBuf>,
    /// Tag given to words missing from the lexicon.
    pub unknown_pos: String,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            source: Source::Local,
            path: None,
            api_base: DEFAULT_API_BASE.into(),
            name: "fre".into(),
            cache_dir: PathBuf::from("cache"),
            concurrency: 4,
            retries: 3,
            year_start: 1700,
            year_end: 1900,
            lexicon: None,
            annotations: None,
            unknown_pos: "X".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct NormalizerSection {
    pub kept_pos_tags: Vec<String>,
    /// Replaces the bundled stopword list.
    pub stopwords_file: Option<PathBuf>,
    /// Replaces the bundled light-verb / address-term list.
    pub drop_lemmas_file: Option<PathBuf>,
    pub extra_stopwords: Vec<String>,
    pub extra_drop_lemmas: Vec<String>,
    pub lowercase: bool,
    pub min_token_length: usize,
}

impl Default for NormalizerSection {
    fn default() -> Self {
        NormalizerSection {
            kept_pos_tags: NormalizerConfig::default().kept_pos_tags.into_iter().collect(),
            stopwords_file: None,
            drop_lemmas_file: None,
            extra_stopwords: vec![],
            extra_drop_lemmas: vec![],
            lowercase: true,
            min_token_length: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct MatrixSection {
    pub min_df: usize,
    pub max_df_fraction: f64,
    pub min_doc_tokens: usize,
}

impl Default for MatrixSection {
    fn default() -> Self {
        let m = MatrixConfig::default();
        MatrixSection { min_df: m.min_df, max_df_fraction: m.max_df_fraction, min_doc_tokens: m.min_doc_tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct ModelSection {
    pub method: MethodChoice,
    pub lda: LdaSection,
    pub nmf: NmfSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct LdaSection {
    pub topics: usize,
    /// Defaults to 50 / topics.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub sample_lag: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        let d = LdaConfig::default();
        LdaSection {
            topics: d.topics,
            alpha: None,
            beta: d.beta,
            iterations: d.iterations,
            burn_in: d.burn_in,
            sample_lag: d.sample_lag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct NmfSection {
    pub topics: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub weighting: Weighting,
}

impl Default for NmfSection {
    fn default() -> Self {
        let d = NmfConfig::default();
        NmfSection { topics: d.topics, max_iterations: d.max_iterations, tolerance: d.tolerance, weighting: d.weighting }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelEntry {
    pub topic: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Defaults to `corpus.year-start`.
    pub period_start: Option<i32>,
    /// Defaults to `corpus.year-end`.
    pub period_end: Option<i32>,
    pub significance: f64,
    pub delta_threshold: f64,
    pub aggregation: Aggregation,
    /// Rolling-mean window for the plotted JSD curve; 0 or 1 disables it.
    pub jsd_smoothing_window: usize,
    pub top_words: usize,
    pub representative_docs: usize,
    /// Topics labeled on the semantic map; all topics when empty.
    pub labels: Vec<LabelEntry>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let rule = ClassifyRule::default();
        AnalysisSection {
            period_start: None,
            period_end: None,
            significance: rule.significance,
            delta_threshold: rule.delta_threshold,
            aggregation: Aggregation::Unweighted,
            jsd_smoothing_window: 0,
            top_words: 15,
            representative_docs: 5,
            labels: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExternalSection {
    pub path: PathBuf,
    #[serde(default = "default_year_column")]
    pub year_column: String,
    #[serde(default = "default_value_column")]
    pub value_column: String,
    #[serde(default)]
    pub country_column: Option<String>,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default = "default_series_name")]
    pub name: String,
    #[serde(default = "default_series_unit")]
    pub unit: String,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub interpolate: bool,
    /// Topics drawn against the series; all topics when empty.
    #[serde(default)]
    pub overlay_topics: Vec<usize>,
}

fn default_year_column() -> String {
    "year".into()
}
fn default_value_column() -> String {
    "gdppc".into()
}
fn default_series_name() -> String {
    "GDP per capita".into()
}
fn default_series_unit() -> String {
    "2011 US$".into()
}

impl PipelineConfig {
    /// A local-corpus configuration with every other setting at its default.
    pub fn local(path: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            config_version: CONFIG_VERSION,
            seed: None,
            output_dir: None,
            corpus: CorpusSection { source: Source::Local, path: Some(path.into()), ..Default::default() },
            normalizer: Default::default(),
            matrix: Default::default(),
            model: Default::default(),
            analysis: Default::default(),
            external: None,
        }
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_owned(), message: e.to_string() })
    }

    /// Reads a config file; returns it with the directory relative paths resolve against.
    pub fn from_path(path: impl AsRef<Path>) -> Result<(Self, PathBuf), ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_owned(), source: e })?;
        let cfg = Self::from_toml(&text, path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Fills defaults that depend on other fields, so the stored config is explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.seed = Some(self.seed());
        c.analysis.period_start.get_or_insert(c.corpus.year_start);
        c.analysis.period_end.get_or_insert(c.corpus.year_end);
        c.model.lda.alpha.get_or_insert(50.0 / c.model.lda.topics.max(1) as f64);
        c
    }

    pub fn period(&self) -> (i32, i32) {
        (
            self.analysis.period_start.unwrap_or(self.corpus.year_start),
            self.analysis.period_end.unwrap_or(self.corpus.year_end),
        )
    }

    pub fn lda_config(&self) -> LdaConfig {
        let l = &self.model.lda;
        LdaConfig {
            topics: l.topics,
            alpha: l.alpha.unwrap_or(50.0 / l.topics.max(1) as f64),
            beta: l.beta,
            iterations: l.iterations,
            burn_in: l.burn_in,
            sample_lag: l.sample_lag,
            seed: self.seed(),
        }
    }

    pub fn nmf_config(&self) -> NmfConfig {
        let n = &self.model.nmf;
        NmfConfig {
            topics: n.topics,
            max_iterations: n.max_iterations,
            tolerance: n.tolerance,
            seed: self.seed(),
            weighting: n.weighting,
        }
    }

    pub fn matrix_config(&self) -> MatrixConfig {
        MatrixConfig {
            min_df: self.matrix.min_df,
            max_df_fraction: self.matrix.max_df_fraction,
            min_doc_tokens: self.matrix.min_doc_tokens,
        }
    }

    pub fn classify_rule(&self) -> ClassifyRule {
        ClassifyRule { significance: self.analysis.significance, delta_threshold: self.analysis.delta_threshold }
    }

    pub fn topics_for(&self, method: Method) -> usize {
        match method {
            Method::Lda => self.model.lda.topics,
            Method::Nmf => self.model.nmf.topics,
        }
    }

    pub fn normalizer_config(&self, base: &Path) -> Result<NormalizerConfig, CorpusError> {
        let n = &self.normalizer;
        let defaults = NormalizerConfig::default();
        let mut stopwords = match &n.stopwords_file {
            Some(p) => read_word_list(base.join(p))?,
            None => defaults.stopwords,
        };
        stopwords.extend(n.extra_stopwords.iter().cloned());
        let mut drop = match &n.drop_lemmas_file {
            Some(p) => read_word_list(base.join(p))?,
            None => defaults.extra_drop_lemmas,
        };
        drop.extend(n.extra_drop_lemmas.iter().cloned());
        let lower = |s: BTreeSet<String>| -> BTreeSet<String> {
            if n.lowercase {
                s.into_iter().map(|w| w.to_lowercase()).collect()
            } else {
                s
            }
        };
        Ok(NormalizerConfig {
            kept_pos_tags: n.kept_pos_tags.iter().cloned().collect(),
            stopwords: lower(stopwords),
            extra_drop_lemmas: lower(drop),
            lowercase: n.lowercase,
            min_token_length: n.min_token_length,
        })
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self, base: &Path) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let exists = |p: &Path| base.join(p).exists();

        check(
            self.config_version == CONFIG_VERSION,
            format!("config-version must be {CONFIG_VERSION}, got {}", self.config_version),
        );
        let c = &self.corpus;
        check(c.year_start <= c.year_end, format!("corpus.year-start {} is after year-end {}", c.year_start, c.year_end));
        match c.source {
            Source::Local => match &c.path {
                Some(p) => check(exists(p), format!("corpus.path {} does not exist", base.join(p).display())),
                None => check(false, "corpus.path is required for source = \"local\"".into()),
            },
            Source::Api => {
                check(!c.api_base.trim().is_empty(), "corpus.api-base must not be empty".into());
                check(!c.name.trim().is_empty(), "corpus.name must not be empty".into());
                check(c.concurrency >= 1, "corpus.concurrency must be at least 1".into());
            }
        }
        if let Some(lex) = &c.lexicon {
            if lex != BUILTIN_LEXICON {
                check(exists(Path::new(lex)), format!("corpus.lexicon {} does not exist", base.join(lex).display()));
            }
        }
        if let Some(p) = &c.annotations {
            check(exists(p), format!("corpus.annotations {} does not exist", base.join(p).display()));
        }

        let n = &self.normalizer;
        check(!n.kept_pos_tags.is_empty(), "normalizer.kept-pos-tags must not be empty".into());
        for (key, p) in [("stopwords-file", &n.stopwords_file), ("drop-lemmas-file", &n.drop_lemmas_file)] {
            if let Some(p) = p {
                check(exists(p), format!("normalizer.{key} {} does not exist", base.join(p).display()));
            }
        }

        if let Err(e) = self.matrix_config().validate() {
            check(false, format!("matrix: {e}"));
        }
        let methods = self.model.method.methods();
        if methods.contains(&Method::Lda) {
            if let Err(e) = self.lda_config().validate() {
                check(false, format!("model.lda: {e}"));
            }
        }
        if methods.contains(&Method::Nmf) {
            if let Err(e) = self.nmf_config().validate() {
                check(false, format!("model.nmf: {e}"));
            }
        }
        let min_topics = methods.iter().map(|&m| self.topics_for(m)).min().unwrap_or(0);

        let a = &self.analysis;
        let (ps, pe) = self.period();
        check(pe > ps, format!("analysis period {ps}-{pe} must have positive length"));
        check(
            a.significance > 0.0 && a.significance < 1.0,
            format!("analysis.significance must lie in (0, 1), got {}", a.significance),
        );
        check(a.delta_threshold >= 0.0, "analysis.delta-threshold must be nonnegative".into());
        check(a.top_words >= 1, "analysis.top-words must be at least 1".into());
        check(a.representative_docs >= 1, "analysis.representative-docs must be at least 1".into());
        for l in &a.labels {
            check(l.topic < min_topics, format!("analysis.labels: topic {} out of range (K = {min_topics})", l.topic));
        }

        if let Some(e) = &self.external {
            check(exists(&e.path), format!("external.path {} does not exist", base.join(&e.path).display()));
            check(
                e.country_column.is_some() == e.country.is_some(),
                "external.country-column and external.country must be given together".into(),
            );
            for &t in &e.overlay_topics {
                check(t < min_topics, format!("external.overlay-topics: topic {t} out of range (K = {min_topics})"));
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}
