//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! Each token's topic is resampled from
//!
//! ```text
//! p(z = k | rest) ∝ (n_dk + alpha) · (n_kw + beta) / (n_k + V·beta)
//! ```
//!
//! with the token's own assignment removed from the counts. After burn-in,
//! every `sample_lag`-th sweep contributes a posterior-mean estimate of theta
//! and phi; the returned model is the average of those estimates.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocTermMatrix;
use crate::model::{seeded_rng, Method, TopicModel};

#[derive(Debug, Error, PartialEq)]
pub enum LdaError {
    #[error("invalid LDA configuration: {0}")]
    Config(String),
    #[error("{topics} topics requested but the vocabulary has only {terms} terms")]
    TooManyTopics { topics: usize, terms: usize },
    #[error("document-term matrix contains no tokens")]
    EmptyMatrix,
    #[error("topic {topic} out of range (model has {topics} topics)")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("n must be at least 1")]
    ZeroCount,
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub sample_lag: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// Defaults for `k` topics: alpha = 50/k, beta = 0.01, 1000 sweeps of
    /// which 500 burn-in, a sample every 10 sweeps.
    pub fn with_topics(k: usize) -> Self {
        LdaConfig {
            topics: k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            sample_lag: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        let bad = |m: String| Err(LdaError::Config(m));
        if self.topics < 1 {
            return bad("topics must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.burn_in >= self.iterations {
            return bad(format!("burn-in {} must be below iterations {}", self.burn_in, self.iterations));
        }
        if self.sample_lag < 1 || self.sample_count() == 0 {
            return bad(format!(
                "sample-lag {} leaves no post-burn-in samples in {} sweeps",
                self.sample_lag,
                self.iterations - self.burn_in
            ));
        }
        Ok(())
    }

    /// Number of post-burn-in samples averaged into the estimate.
    pub fn sample_count(&self) -> usize {
        if self.sample_lag == 0 {
            return 0;
        }
        self.iterations.saturating_sub(self.burn_in) / self.sample_lag
    }
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self::with_topics(10)
    }
}

/// Sufficient statistics of the collapsed sampler.
#[derive(Debug, Clone)]
pub struct GibbsState {
    k: usize,
    v: usize,
    /// Word id of every token, documents laid out contiguously.
    words: Vec<u32>,
    doc_start: Vec<usize>,
    z: Vec<u32>,
    n_dk: Vec<u32>,
    /// Word-major topic-word counts: `n_wk[w * k + topic]`.
    n_wk: Vec<u32>,
    n_k: Vec<u64>,
}

impl GibbsState {
    pub fn n_docs(&self) -> usize {
        self.doc_start.len() - 1
    }

    pub fn n_tokens(&self) -> usize {
        self.words.len()
    }

    pub fn assignments(&self) -> &[u32] {
        &self.z
    }

    pub fn doc_topic(&self, d: usize, k: usize) -> u32 {
        self.n_dk[d * self.k + k]
    }

    pub fn topic_word(&self, k: usize, w: usize) -> u32 {
        self.n_wk[w * self.k + k]
    }

    pub fn topic_total(&self, k: usize) -> u64 {
        self.n_k[k]
    }

    /// Recounts every table from the assignments and compares:
    /// Σ_k n_dk = tokens in d, Σ_w n_kw = n_k, Σ_k n_k = total tokens.
    pub fn check_conservation(&self) -> Result<(), String> {
        let mut n_dk = vec![0u32; self.n_dk.len()];
        let mut n_wk = vec![0u32; self.n_wk.len()];
        for d in 0..self.n_docs() {
            let (s, e) = (self.doc_start[d], self.doc_start[d + 1]);
            let mut doc_sum = 0u64;
            for i in s..e {
                let (w, t) = (self.words[i] as usize, self.z[i] as usize);
                n_dk[d * self.k + t] += 1;
                n_wk[w * self.k + t] += 1;
            }
            for t in 0..self.k {
                doc_sum += self.n_dk[d * self.k + t] as u64;
            }
            if doc_sum != (e - s) as u64 {
                return Err(format!("document {d}: doc-topic counts sum to {doc_sum}, has {} tokens", e - s));
            }
        }
        if n_dk != self.n_dk {
            return Err("doc-topic table disagrees with assignments".into());
        }
        if n_wk != self.n_wk {
            return Err("topic-word table disagrees with assignments".into());
        }
        for t in 0..self.k {
            let s: u64 = (0..self.v).map(|w| self.n_wk[w * self.k + t] as u64).sum();
            if s != self.n_k[t] {
                return Err(format!("topic {t}: word counts sum to {s}, total says {}", self.n_k[t]));
            }
        }
        let total: u64 = self.n_k.iter().sum();
        if total != self.words.len() as u64 {
            return Err(format!("topic totals sum to {total}, corpus has {} tokens", self.words.len()));
        }
        Ok(())
    }

    fn init<R: Rng>(matrix: &DocTermMatrix, k: usize, rng: &mut R) -> Self {
        let v = matrix.n_terms();
        let mut words = Vec::with_capacity(matrix.total_tokens() as usize);
        let mut doc_start = Vec::with_capacity(matrix.n_docs() + 1);
        for row in matrix.rows() {
            doc_start.push(words.len());
            for &(t, c) in row {
                words.extend(std::iter::repeat_n(t as u32, c as usize));
            }
        }
        doc_start.push(words.len());
        let mut state = GibbsState {
            k,
            v,
            z: vec![0; words.len()],
            n_dk: vec![0; matrix.n_docs() * k],
            n_wk: vec![0; v * k],
            n_k: vec![0; k],
            words,
            doc_start,
        };
        for d in 0..state.n_docs() {
            for i in state.doc_start[d]..state.doc_start[d + 1] {
                let t = rng.random_range(0..k);
                state.z[i] = t as u32;
                state.n_dk[d * k + t] += 1;
                state.n_wk[state.words[i] as usize * k + t] += 1;
                state.n_k[t] += 1;
            }
        }
        state
    }

    fn sweep<R: Rng>(&mut self, alpha: f64, beta: f64, rng: &mut R, probs: &mut [f64]) {
        let k = self.k;
        let v_beta = self.v as f64 * beta;
        for d in 0..self.n_docs() {
            for i in self.doc_start[d]..self.doc_start[d + 1] {
                let w = self.words[i] as usize;
                let old = self.z[i] as usize;
                self.n_dk[d * k + old] -= 1;
                self.n_wk[w * k + old] -= 1;
                self.n_k[old] -= 1;

                let dk = &self.n_dk[d * k..(d + 1) * k];
                let wk = &self.n_wk[w * k..(w + 1) * k];
                let mut total = 0.0;
                for t in 0..k {
                    total += (dk[t] as f64 + alpha) * (wk[t] as f64 + beta) / (self.n_k[t] as f64 + v_beta);
                    probs[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = probs.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.z[i] = new as u32;
                self.n_dk[d * k + new] += 1;
                self.n_wk[w * k + new] += 1;
                self.n_k[new] += 1;
            }
        }
    }

    /// Adds the current posterior-mean theta and phi to the accumulators.
    fn accumulate(&self, alpha: f64, beta: f64, theta: &mut Array2<f64>, phi: &mut Array2<f64>) {
        let k = self.k;
        let k_alpha = k as f64 * alpha;
        for d in 0..self.n_docs() {
            let len = (self.doc_start[d + 1] - self.doc_start[d]) as f64;
            for t in 0..k {
                theta[[d, t]] += (self.n_dk[d * k + t] as f64 + alpha) / (len + k_alpha);
            }
        }
        let v_beta = self.v as f64 * beta;
        for t in 0..k {
            let denom = self.n_k[t] as f64 + v_beta;
            for w in 0..self.v {
                phi[[t, w]] += (self.n_wk[w * k + t] as f64 + beta) / denom;
            }
        }
    }
}

/// Fits LDA; see [`fit_lda_observed`].
pub fn fit_lda(matrix: &DocTermMatrix, cfg: &LdaConfig) -> Result<TopicModel, LdaError> {
    fit_lda_observed(matrix, cfg, |_, _| {})
}

/// Fits LDA, calling `observer(sweep, state)` after every sweep (1-based).
pub fn fit_lda_observed<F>(matrix: &DocTermMatrix, cfg: &LdaConfig, mut observer: F) -> Result<TopicModel, LdaError>
where
    F: FnMut(usize, &GibbsState),
{
    cfg.validate()?;
    if matrix.total_tokens() == 0 {
        return Err(LdaError::EmptyMatrix);
    }
    if cfg.topics > matrix.n_terms() {
        return Err(LdaError::TooManyTopics { topics: cfg.topics, terms: matrix.n_terms() });
    }
    let (d, k, v) = (matrix.n_docs(), cfg.topics, matrix.n_terms());
    let mut rng = seeded_rng(cfg.seed);
    let mut state = GibbsState::init(matrix, k, &mut rng);
    debug_assert_eq!(state.check_conservation(), Ok(()));

    let mut theta = Array2::<f64>::zeros((d, k));
    let mut phi = Array2::<f64>::zeros((k, v));
    let mut probs = vec![0.0; k];
    let mut samples = 0usize;
    for sweep in 1..=cfg.iterations {
        state.sweep(cfg.alpha, cfg.beta, &mut rng, &mut probs);
        debug_assert_eq!(state.check_conservation(), Ok(()));
        if sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.sample_lag == 0 {
            state.accumulate(cfg.alpha, cfg.beta, &mut theta, &mut phi);
            samples += 1;
        }
        if sweep % 100 == 0 {
            log::debug!("lda sweep {sweep}/{}", cfg.iterations);
        }
        observer(sweep, &state);
    }
    debug_assert_eq!(samples, cfg.sample_count());
    normalize_rows(&mut theta);
    normalize_rows(&mut phi);

    Ok(TopicModel {
        method: Method::Lda,
        theta,
        phi,
        doc_ids: matrix.doc_ids().to_vec(),
        doc_years: matrix.doc_years().to_vec(),
        terms: matrix.terms().to_vec(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg).expect("config serializes"),
        diagnostics: serde_json::json!({ "samples": samples }),
    })
}

/// Divides every row by its sum; all-zero rows are left unchanged.
pub(crate) fn normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
}

/// The `n` most probable terms of a topic, descending; ties go to the lower
/// vocabulary index.
pub fn top_words(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<(String, f64)>, LdaError> {
    if topic >= model.n_topics() {
        return Err(LdaError::TopicOutOfRange { topic, topics: model.n_topics() });
    }
    if n == 0 {
        return Err(LdaError::ZeroCount);
    }
    let row = model.phi.row(topic);
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    Ok(idx.into_iter().take(n).map(|i| (model.terms[i].clone(), row[i])).collect())
}

/// `exp(−Σ count · ln p(w|d) / N)` with `p(w|d) = Σ_k theta[d,k]·phi[k,w]`.
pub fn perplexity(model: &TopicModel, matrix: &DocTermMatrix) -> Result<f64, LdaError> {
    if model.phi.ncols() != matrix.n_terms() {
        return Err(LdaError::VocabularyMismatch(format!(
            "model has {} terms, matrix has {}",
            model.phi.ncols(),
            matrix.n_terms()
        )));
    }
    if model.terms.as_slice() != matrix.terms() {
        return Err(LdaError::VocabularyMismatch("term lists differ".into()));
    }
    if model.theta.nrows() != matrix.n_docs() {
        return Err(LdaError::VocabularyMismatch(format!(
            "model has {} documents, matrix has {}",
            model.theta.nrows(),
            matrix.n_docs()
        )));
    }
    let total = matrix.total_tokens();
    if total == 0 {
        return Err(LdaError::EmptyMatrix);
    }
    let mut log_lik = 0.0;
    for d in 0..matrix.n_docs() {
        let theta = model.theta.row(d);
        for &(w, c) in matrix.row(d) {
            let p = theta.dot(&model.phi.column(w));
            log_lik += c as f64 * p.ln();
        }
    }
    Ok((-log_lik / total as f64).exp())
}
