//! Non-negative matrix factorization `V ≈ W·H` with Frobenius-norm
//! multiplicative updates:
//!
//! ```text
//! H ← H ∘ (WᵀV) / (WᵀW·H + ε)
//! W ← W ∘ (V·Hᵀ) / (W·H·Hᵀ + ε)
//! ```
//!
//! `V` is kept sparse; the objective `‖V − WH‖²` is evaluated without forming
//! the dense product.

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocTermMatrix;
use crate::lda::normalize_rows;
use crate::model::{seeded_rng, Method, TopicModel};
use crate::numeric::CompensatedSum;

/// Guard added to update denominators.
pub const DENOM_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum NmfError {
    #[error("invalid NMF configuration: {0}")]
    Config(String),
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("empty input matrix")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    RawCounts,
    TfIdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub topics: usize,
    pub max_iterations: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
    pub seed: u64,
    pub weighting: Weighting,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig { topics: 10, max_iterations: 500, tolerance: 1e-5, seed: 0, weighting: Weighting::TfIdf }
    }
}

impl NmfConfig {
    pub fn validate(&self) -> Result<(), NmfError> {
        if self.topics < 1 {
            return Err(NmfError::Config("topics must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(NmfError::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations < 1 {
            return Err(NmfError::Config("max-iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Row-sparse nonnegative real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    /// Validates entries; zeros are dropped.
    pub fn new(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, NmfError> {
        let mut clean = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for (j, x) in row {
                assert!(j < n_cols, "column {j} out of range");
                if !x.is_finite() {
                    return Err(NmfError::NonFinite { row: i, col: j });
                }
                if x < 0.0 {
                    return Err(NmfError::NegativeEntry { row: i, col: j, value: x });
                }
                if x > 0.0 {
                    r.push((j, x));
                }
            }
            r.sort_by_key(|&(j, _)| j);
            clean.push(r);
        }
        Ok(SparseMatrix { n_cols, rows: clean })
    }

    pub fn from_dense(m: &Array2<f64>) -> Result<Self, NmfError> {
        let rows = m
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().map(|(j, &x)| (j, x)).collect())
            .collect();
        Self::new(m.ncols(), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn squared_norm(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, x)| x * x).sum()
    }

    fn mean(&self) -> f64 {
        let n = (self.n_rows() * self.n_cols) as f64;
        if n == 0.0 {
            0.0
        } else {
            self.rows.iter().flatten().map(|&(_, x)| x).sum::<f64>() / n
        }
    }
}

/// Applies the configured weighting to raw counts.
///
/// TF-IDF uses `count · (ln((1 + D) / (1 + df)) + 1)` followed by L2
/// normalization of each document row.
pub fn weight_matrix(matrix: &DocTermMatrix, weighting: Weighting) -> SparseMatrix {
    let rows: Vec<Vec<(usize, f64)>> = match weighting {
        Weighting::RawCounts => {
            matrix.rows().iter().map(|r| r.iter().map(|&(t, c)| (t, c as f64)).collect()).collect()
        }
        Weighting::TfIdf => {
            let mut df = vec![0usize; matrix.n_terms()];
            for row in matrix.rows() {
                for &(t, _) in row {
                    df[t] += 1;
                }
            }
            let n = matrix.n_docs() as f64;
            let idf: Vec<f64> = df.iter().map(|&f| ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0).collect();
            matrix
                .rows()
                .iter()
                .map(|r| {
                    let w: Vec<(usize, f64)> = r.iter().map(|&(t, c)| (t, c as f64 * idf[t])).collect();
                    let norm = w.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt();
                    w.into_iter().map(|(t, x)| (t, if norm > 0.0 { x / norm } else { x })).collect()
                })
                .collect()
        }
    };
    SparseMatrix::new(matrix.n_terms(), rows).expect("weighted counts are finite and nonnegative")
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    /// D×K document loadings.
    pub w: Array2<f64>,
    /// K×V topic-term loadings.
    pub h: Array2<f64>,
    /// Objective `‖V − WH‖²_F` after each iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl NmfModel {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// `‖V − WH‖²_F` without densifying `V`: the nonzero cells are summed
/// directly; the zero cells of a row are summed directly when the row is
/// mostly nonzero, otherwise through `w_d·(HHᵀ)·w_d − Σ_nz (wh)²`.
pub fn objective(v: &SparseMatrix, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let hht = h.dot(&h.t());
    let n_cols = v.n_cols;
    let mut total = CompensatedSum::default();
    let mut in_row = vec![false; n_cols];
    for (d, row) in v.rows.iter().enumerate() {
        let wd = w.row(d);
        let mut nz_pred_sq = CompensatedSum::default();
        for &(t, x) in row {
            let pred = wd.dot(&h.column(t));
            nz_pred_sq.add(pred * pred);
            total.add((x - pred) * (x - pred));
        }
        if 2 * row.len() >= n_cols {
            for &(t, _) in row {
                in_row[t] = true;
            }
            for t in (0..n_cols).filter(|&t| !in_row[t]) {
                let pred = wd.dot(&h.column(t));
                total.add(pred * pred);
            }
            for &(t, _) in row {
                in_row[t] = false;
            }
        } else {
            let full = wd.dot(&hht.dot(&wd));
            total.add((full - nz_pred_sq.value()).max(0.0));
        }
    }
    total.value()
}

/// WᵀV (K×V).
fn wt_v(v: &SparseMatrix, w: &Array2<f64>) -> Array2<f64> {
    let k = w.ncols();
    let mut out = Array2::zeros((k, v.n_cols));
    for (d, row) in v.rows.iter().enumerate() {
        for &(t, x) in row {
            for j in 0..k {
                out[[j, t]] += w[[d, j]] * x;
            }
        }
    }
    out
}

/// V·Hᵀ (D×K).
fn v_ht(v: &SparseMatrix, h: &Array2<f64>) -> Array2<f64> {
    let k = h.nrows();
    let mut out = Array2::zeros((v.n_rows(), k));
    for (d, row) in v.rows.iter().enumerate() {
        for &(t, x) in row {
            for j in 0..k {
                out[[d, j]] += x * h[[j, t]];
            }
        }
    }
    out
}

/// Fits the factorization from a seeded uniform-random start, scaled so that
/// `W·H` starts near the mean of `V`.
pub fn fit_nmf(v: &SparseMatrix, cfg: &NmfConfig) -> Result<NmfModel, NmfError> {
    cfg.validate()?;
    if v.n_rows() == 0 || v.n_cols() == 0 {
        return Err(NmfError::Empty);
    }
    let k = cfg.topics;
    let mut rng = seeded_rng(cfg.seed);
    let mean = v.mean();
    let scale = if mean > 0.0 { (mean / k as f64).sqrt() } else { 1.0 };
    let mut w = Array2::from_shape_simple_fn((v.n_rows(), k), || rng.random::<f64>() * scale);
    let mut h = Array2::from_shape_simple_fn((k, v.n_cols()), || rng.random::<f64>() * scale);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev = objective(v, &w, &h);
    for it in 0..cfg.max_iterations {
        let num = wt_v(v, &w);
        let den = w.t().dot(&w).dot(&h);
        h.zip_mut_with(&(num / (den + DENOM_EPS)), |x, r| *x *= r);

        let num = v_ht(v, &h);
        let den = w.dot(&h.dot(&h.t()));
        w.zip_mut_with(&(num / (den + DENOM_EPS)), |x, r| *x *= r);

        let obj = objective(v, &w, &h);
        trace.push(obj);
        let rel = if prev > 0.0 { (prev - obj) / prev } else { 0.0 };
        if obj == 0.0 || rel < cfg.tolerance {
            converged = true;
            log::debug!("nmf converged after {} iterations (objective {obj})", it + 1);
            break;
        }
        prev = obj;
    }
    Ok(NmfModel { w, h, objective_trace: trace, converged })
}

/// Row-normalized doc-topic loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct Proportions {
    pub rows: Array2<f64>,
    /// Rows of `W` that summed to zero and were replaced by the uniform distribution.
    pub degenerate: Vec<usize>,
}

pub fn doc_topic_proportions(model: &NmfModel) -> Proportions {
    let k = model.w.ncols();
    let mut rows = model.w.clone();
    let mut degenerate = Vec::new();
    for (i, mut row) in rows.axis_iter_mut(Axis(0)).enumerate() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        } else {
            row.fill(1.0 / k as f64);
            degenerate.push(i);
        }
    }
    Proportions { rows, degenerate }
}

/// Wraps a fitted factorization as a [`TopicModel`]: theta from
/// [`doc_topic_proportions`], phi from the row-normalized `H` (zero rows
/// become uniform).
pub fn into_topic_model(model: &NmfModel, matrix: &DocTermMatrix, cfg: &NmfConfig) -> TopicModel {
    let props = doc_topic_proportions(model);
    let mut phi = model.h.clone();
    normalize_rows(&mut phi);
    let v = phi.ncols() as f64;
    let mut empty_topics = Vec::new();
    for (k, mut row) in phi.rows_mut().into_iter().enumerate() {
        if row.sum() == 0.0 {
            row.fill(1.0 / v);
            empty_topics.push(k);
        }
    }
    if !props.degenerate.is_empty() {
        log::warn!("nmf: {} documents with zero loadings mapped to uniform", props.degenerate.len());
    }
    TopicModel {
        method: Method::Nmf,
        theta: props.rows,
        phi,
        doc_ids: matrix.doc_ids().to_vec(),
        doc_years: matrix.doc_years().to_vec(),
        terms: matrix.terms().to_vec(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg).expect("config serializes"),
        diagnostics: serde_json::json!({
            "iterations": model.iterations(),
            "converged": model.converged,
            "objective_trace": model.objective_trace,
            "degenerate_documents": props.degenerate.iter().map(|&d| matrix.doc_ids()[d].clone()).collect::<Vec<_>>(),
            "empty_topics": empty_topics,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn negative_entry_rejected() {
        let m = array![[1.0, -0.5], [0.0, 2.0]];
        assert_eq!(
            SparseMatrix::from_dense(&m).unwrap_err(),
            NmfError::NegativeEntry { row: 0, col: 1, value: -0.5 }
        );
    }

    #[test]
    fn zero_matrix_gives_zero_objective() {
        let v = SparseMatrix::from_dense(&Array2::zeros((3, 4))).unwrap();
        let m = fit_nmf(&v, &NmfConfig { topics: 2, ..Default::default() }).unwrap();
        assert_eq!(m.objective_trace[0], 0.0);
        assert!(m.w.dot(&m.h).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn objective_matches_dense_residual() {
        let dense = array![[1.0, 0.0, 2.0], [0.0, 3.0, 1.0]];
        let v = SparseMatrix::from_dense(&dense).unwrap();
        let w = array![[0.5, 1.0], [1.5, 0.2]];
        let h = array![[0.3, 0.1, 0.9], [0.7, 0.4, 0.2]];
        let resid = &dense - &w.dot(&h);
        let direct: f64 = resid.iter().map(|x| x * x).sum();
        assert!((objective(&v, &w, &h) - direct).abs() < 1e-12);
    }

    #[test]
    fn proportions_rows_and_degenerate_flag() {
        let model = NmfModel {
            w: array![[2.0, 2.0], [0.0, 0.0], [1.0, 3.0]],
            h: array![[1.0], [1.0]],
            objective_trace: vec![],
            converged: true,
        };
        let p = doc_topic_proportions(&model);
        assert_eq!(p.rows, array![[0.5, 0.5], [0.5, 0.5], [0.25, 0.75]]);
        assert_eq!(p.degenerate, vec![1]);
    }

    #[test]
    fn tfidf_rows_are_unit_norm() {
        let m = DocTermMatrix::from_rows(
            vec![vec![(0, 3), (1, 1)], vec![(1, 2), (2, 5)]],
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into()],
            vec![1700, 1701],
        );
        let w = weight_matrix(&m, Weighting::TfIdf);
        for row in w.rows() {
            let n: f64 = row.iter().map(|&(_, x)| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        // b appears in both documents so gets the smallest idf
        let raw = weight_matrix(&m, Weighting::RawCounts);
        assert_eq!(raw.rows()[1], vec![(1, 2.0), (2, 5.0)]);
    }

    #[test]
    fn invalid_config() {
        assert!(NmfConfig { topics: 0, ..Default::default() }.validate().is_err());
        assert!(NmfConfig { tolerance: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn seed_determinism() {
        let v = SparseMatrix::from_dense(&array![[1.0, 2.0, 0.0], [0.5, 0.0, 3.0], [2.0, 1.0, 1.0]]).unwrap();
        let cfg = NmfConfig { topics: 2, seed: 5, ..Default::default() };
        assert_eq!(fit_nmf(&v, &cfg).unwrap(), fit_nmf(&v, &cfg).unwrap());
    }
}
