//! Semantic map of documents: cosine distances between topic vectors,
//! classical (Torgerson) MDS into the plane, and topic labels placed at the
//! centroid of each topic's most representative documents.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TopicModel;

/// Tolerance for symmetry and zero-diagonal checks on distance input.
const SYMMETRY_TOL: f64 = 1e-12;
/// Relative gap below which eigenvector magnitudes count as tied.
const SIGN_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SemmapError {
    #[error("row {0} has zero norm")]
    ZeroNorm(usize),
    #[error("distance matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("distance matrix has nonzero diagonal entry {value} at {index}")]
    BadDiagonal { index: usize, value: f64 },
    #[error("distance matrix has non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("topic {topic} out of range (model has {topics} topics)")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("requested {requested} documents but only {available} exist")]
    TooManyDocs { requested: usize, available: usize },
    #[error("document {0} has no coordinates")]
    UnknownDoc(String),
    #[error("dims must be at least 1")]
    ZeroDims,
}

/// `1 − cos(θᵢ, θⱼ)`; exact zeros on the diagonal, exactly symmetric.
pub fn cosine_distance_matrix(theta: ArrayView2<f64>) -> Result<Array2<f64>, SemmapError> {
    let n = theta.nrows();
    let norms: Vec<f64> = theta.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(SemmapError::ZeroNorm(i));
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let sim = theta.row(i).dot(&theta.row(j)) / (norms[i] * norms[j]);
            let d = (1.0 - sim).clamp(0.0, 2.0);
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    Ok(out)
}

/// Coordinates of a classical MDS embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// n × dims coordinates.
    pub coords: Array2<f64>,
    /// All eigenvalues of the double-centered matrix, descending.
    pub eigenvalues: Vec<f64>,
}

/// Classical MDS: `B = −½·J·D²·J`, coordinates from the top `dims`
/// eigenpairs as `v·√λ` (negative eigenvalues give zero coordinates). Each
/// axis is oriented so its largest-magnitude coordinate is positive; among
/// near-equal magnitudes the lowest index decides.
pub fn classical_mds(distances: ArrayView2<f64>, dims: usize) -> Result<Embedding, SemmapError> {
    let (n, m) = distances.dim();
    if n != m {
        return Err(SemmapError::NotSquare(n, m));
    }
    if dims == 0 {
        return Err(SemmapError::ZeroDims);
    }
    for i in 0..n {
        let dii = distances[[i, i]];
        if !dii.is_finite() || dii.abs() > SYMMETRY_TOL {
            return Err(SemmapError::BadDiagonal { index: i, value: dii });
        }
        for j in (i + 1)..n {
            let (a, b) = (distances[[i, j]], distances[[j, i]]);
            if !a.is_finite() || !b.is_finite() {
                return Err(SemmapError::NonFinite(i, j));
            }
            if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                return Err(SemmapError::Asymmetric(i, j));
            }
        }
    }
    if n == 0 {
        return Ok(Embedding { coords: Array2::zeros((0, dims)), eigenvalues: vec![] });
    }

    // double centering of squared distances
    let sq = DMatrix::from_fn(n, n, |i, j| {
        let d = 0.5 * (distances[[i, j]] + distances[[j, i]]);
        d * d
    });
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let mut coords = Array2::zeros((n, dims));
    for (axis, &ei) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[ei];
        if lambda <= 0.0 {
            continue;
        }
        let scale = lambda.sqrt();
        let col = eig.eigenvectors.column(ei);
        let max_abs = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let pivot = (0..n).find(|&i| col[i].abs() >= max_abs * (1.0 - SIGN_TIE_TOL)).unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[[i, axis]] = sign * col[i] * scale;
        }
    }
    Ok(Embedding { coords, eigenvalues })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicLabel {
    pub topic: usize,
    pub text: String,
    pub x: f64,
    pub y: f64,
    pub doc_ids: Vec<String>,
}

/// A 2-D semantic map with optional topic labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCoords {
    pub doc_ids: Vec<String>,
    /// D × 2.
    pub xy: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    pub labels: Vec<TopicLabel>,
}

impl EmbeddingCoords {
    pub fn new(doc_ids: Vec<String>, embedding: Embedding) -> Self {
        assert_eq!(doc_ids.len(), embedding.coords.nrows(), "ids and coordinates disagree");
        EmbeddingCoords { doc_ids, xy: embedding.coords, eigenvalues: embedding.eigenvalues, labels: vec![] }
    }

    fn position(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id)
    }
}

/// Cosine distances over the model's theta, embedded in two dimensions.
pub fn semantic_map(model: &TopicModel) -> Result<EmbeddingCoords, SemmapError> {
    let dist = cosine_distance_matrix(model.theta.view())?;
    Ok(EmbeddingCoords::new(model.doc_ids.clone(), classical_mds(dist.view(), 2)?))
}

/// The `n` documents with the largest share of `topic`, descending; ties go
/// to the lexicographically smaller doc id.
pub fn representative_docs(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<String>, SemmapError> {
    let k = model.n_topics();
    if topic >= k {
        return Err(SemmapError::TopicOutOfRange { topic, topics: k });
    }
    if n > model.n_docs() {
        return Err(SemmapError::TooManyDocs { requested: n, available: model.n_docs() });
    }
    let col = model.theta.column(topic);
    let mut idx: Vec<usize> = (0..model.n_docs()).collect();
    idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then_with(|| model.doc_ids[a].cmp(&model.doc_ids[b])));
    Ok(idx.into_iter().take(n).map(|i| model.doc_ids[i].clone()).collect())
}

/// Places each label at the mean position of its topic's `n_docs`
/// representative documents.
pub fn place_labels(
    mut coords: EmbeddingCoords,
    model: &TopicModel,
    topics: &[(usize, String)],
    n_docs: usize,
) -> Result<EmbeddingCoords, SemmapError> {
    let mut labels = Vec::with_capacity(topics.len());
    for (topic, text) in topics {
        let docs = representative_docs(model, *topic, n_docs)?;
        let (mut x, mut y) = (0.0, 0.0);
        for id in &docs {
            let i = coords.position(id).ok_or_else(|| SemmapError::UnknownDoc(id.clone()))?;
            x += coords.xy[[i, 0]];
            y += coords.xy[[i, 1]];
        }
        let n = docs.len().max(1) as f64;
        labels.push(TopicLabel { topic: *topic, text: text.clone(), x: x / n, y: y / n, doc_ids: docs });
    }
    coords.labels = labels;
    Ok(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Method;
    use ndarray::array;

    #[test]
    fn cosine_basics() {
        let theta = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let d = cosine_distance_matrix(theta.view()).unwrap();
        assert_eq!(d[[0, 1]], 1.0);
        assert_eq!(d[[0, 2]], 0.0);
        assert_eq!(d[[1, 1]], 0.0);
        assert_eq!(d, d.t());
    }

    #[test]
    fn zero_row_is_error() {
        let theta = array![[1.0, 0.0], [0.0, 0.0]];
        assert_eq!(cosine_distance_matrix(theta.view()), Err(SemmapError::ZeroNorm(1)));
    }

    #[test]
    fn two_points_lie_on_first_axis() {
        let d = 0.8;
        let e = classical_mds(array![[0.0, d], [d, 0.0]].view(), 2).unwrap();
        let xs = [e.coords[[0, 0]], e.coords[[1, 0]]];
        let mut sorted = xs;
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] + d / 2.0).abs() < 1e-12 && (sorted[1] - d / 2.0).abs() < 1e-12);
        assert!(e.coords.column(1).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_distances_give_zero_coordinates() {
        let e = classical_mds(Array2::zeros((4, 4)).view(), 2).unwrap();
        assert!(e.coords.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            classical_mds(array![[0.0, 1.0], [2.0, 0.0]].view(), 2),
            Err(SemmapError::Asymmetric(0, 1))
        ));
        assert!(matches!(
            classical_mds(array![[-1.0, 1.0], [1.0, 0.0]].view(), 2),
            Err(SemmapError::BadDiagonal { index: 0, .. })
        ));
        assert!(matches!(classical_mds(Array2::zeros((2, 3)).view(), 2), Err(SemmapError::NotSquare(2, 3))));
    }

    fn model_with_theta(theta: Array2<f64>, ids: &[&str]) -> TopicModel {
        TopicModel {
            method: Method::Lda,
            phi: Array2::from_elem((theta.ncols(), 1), 1.0),
            doc_years: vec![1700; ids.len()],
            doc_ids: ids.iter().map(|s| s.to_string()).collect(),
            theta,
            terms: vec!["w".into()],
            seed: 0,
            config: serde_json::Value::Null,
            diagnostics: serde_json::Value::Null,
        }
    }

    #[test]
    fn representative_docs_order_and_ties() {
        let m = model_with_theta(array![[0.9, 0.1], [0.1, 0.9], [0.5, 0.5]], &["doc0", "doc1", "doc2"]);
        assert_eq!(representative_docs(&m, 0, 2).unwrap(), ["doc0", "doc2"]);
        let tied = model_with_theta(array![[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]], &["c", "a", "b"]);
        assert_eq!(representative_docs(&tied, 0, 3).unwrap(), ["a", "b", "c"]);
        assert!(matches!(representative_docs(&m, 5, 1), Err(SemmapError::TopicOutOfRange { .. })));
        assert!(matches!(representative_docs(&m, 0, 4), Err(SemmapError::TooManyDocs { .. })));
    }

    #[test]
    fn label_at_centroid() {
        let ids = ["a", "b", "c", "d", "e", "f"];
        let theta = array![[0.9, 0.1], [0.8, 0.2], [0.7, 0.3], [0.6, 0.4], [0.55, 0.45], [0.1, 0.9]];
        let m = model_with_theta(theta, &ids);
        let coords = EmbeddingCoords {
            doc_ids: ids.iter().map(|s| s.to_string()).collect(),
            xy: array![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0], [1.0, 1.0], [9.0, 9.0]],
            eigenvalues: vec![],
            labels: vec![],
        };
        let out = place_labels(coords, &m, &[(0, "First".into())], 5).unwrap();
        assert_eq!(out.labels.len(), 1);
        assert_eq!((out.labels[0].x, out.labels[0].y), (1.0, 1.0));
        assert_eq!(out.labels[0].doc_ids, ["a", "b", "c", "d", "e"]);
    }
}
