//! Kullback–Leibler and Jensen–Shannon divergences in bits, yearly
//! aggregation of document topic distributions, and the JSD series between
//! consecutive years.

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::STOCHASTIC_TOL;

#[derive(Debug, Error, PartialEq)]
pub enum DivergenceError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("not a probability vector: {0}")]
    NotProbability(String),
    #[error("no documents to aggregate")]
    NoDocuments,
    #[error("{docs} documents but {years} years")]
    Misaligned { docs: usize, years: usize },
    #[error("need at least 2 years, got {0}")]
    TooFewYears(usize),
}

/// A nonnegative vector summing to 1 (within 1e-9).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self, DivergenceError> {
        if p.is_empty() {
            return Err(DivergenceError::NotProbability("empty vector".into()));
        }
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(DivergenceError::NotProbability(format!("entry {x}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(DivergenceError::NotProbability(format!("sums to {s}")));
        }
        Ok(ProbVector(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Σ_{i: p_i>0} p_i·log₂(p_i/q_i) over raw slices. Infinite when `q`
/// vanishes somewhere on the support of `p`.
fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            d += pi * (pi / qi).log2();
        }
    }
    d
}

/// Kullback–Leibler divergence `D(p‖q)` in bits; `f64::INFINITY` when `q`
/// has a zero where `p` does not.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64, DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::LengthMismatch(p.len(), q.len()));
    }
    Ok(kl_bits(&p.0, &q.0).max(0.0))
}

/// Jensen–Shannon divergence in bits, `½D(p‖m) + ½D(q‖m)` with
/// `m = ½(p + q)`. Symmetric bit for bit and clamped to [0, 1].
pub fn jsd(p: &ProbVector, q: &ProbVector) -> Result<f64, DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::LengthMismatch(p.len(), q.len()));
    }
    Ok(jsd_bits(&p.0, &q.0))
}

fn jsd_bits(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let v = 0.5 * kl_bits(p, &m) + 0.5 * kl_bits(q, &m);
    v.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Plain mean of the document rows of a year.
    #[default]
    Unweighted,
    /// Mean weighted by per-document token counts.
    TokenWeighted,
}

/// Mean topic distribution for each year that has at least one document.
#[derive(Debug, Clone, PartialEq)]
pub struct YearlyTopicSeries {
    pub years: Vec<i32>,
    pub distributions: Vec<ProbVector>,
    pub doc_counts: Vec<usize>,
}

impl YearlyTopicSeries {
    pub fn n_topics(&self) -> usize {
        self.distributions.first().map_or(0, ProbVector::len)
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }
}

/// Unweighted yearly means of the rows of `theta`.
pub fn yearly_distributions(theta: ArrayView2<f64>, doc_years: &[i32]) -> Result<YearlyTopicSeries, DivergenceError> {
    aggregate(theta, doc_years, None)
}

/// Yearly means of `theta` rows weighted by `weights` (e.g. token counts).
pub fn yearly_distributions_weighted(
    theta: ArrayView2<f64>,
    doc_years: &[i32],
    weights: &[f64],
) -> Result<YearlyTopicSeries, DivergenceError> {
    if weights.len() != doc_years.len() {
        return Err(DivergenceError::Misaligned { docs: weights.len(), years: doc_years.len() });
    }
    aggregate(theta, doc_years, Some(weights))
}

fn aggregate(theta: ArrayView2<f64>, doc_years: &[i32], weights: Option<&[f64]>) -> Result<YearlyTopicSeries, DivergenceError> {
    if theta.nrows() != doc_years.len() {
        return Err(DivergenceError::Misaligned { docs: theta.nrows(), years: doc_years.len() });
    }
    if doc_years.is_empty() {
        return Err(DivergenceError::NoDocuments);
    }
    let k = theta.ncols();
    let mut by_year: BTreeMap<i32, (Vec<f64>, f64, usize)> = BTreeMap::new();
    for (d, &year) in doc_years.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[d]);
        let entry = by_year.entry(year).or_insert_with(|| (vec![0.0; k], 0.0, 0));
        for (acc, &x) in entry.0.iter_mut().zip(theta.row(d)) {
            *acc += w * x;
        }
        entry.1 += w;
        entry.2 += 1;
    }
    let mut series = YearlyTopicSeries { years: vec![], distributions: vec![], doc_counts: vec![] };
    for (year, (sum, weight, n)) in by_year {
        if weight <= 0.0 {
            log::warn!("year {year}: zero total weight, excluded");
            continue;
        }
        let mean = sum.into_iter().map(|s| s / weight).collect();
        series.years.push(year);
        series.distributions.push(ProbVector::new(mean)?);
        series.doc_counts.push(n);
    }
    if series.is_empty() {
        return Err(DivergenceError::NoDocuments);
    }
    Ok(series)
}

/// JSD between consecutive included years.
#[derive(Debug, Clone, PartialEq)]
pub struct JsdSeries {
    pub year_pairs: Vec<(i32, i32)>,
    pub values: Vec<f64>,
}

impl JsdSeries {
    /// Years separating each pair (1 for adjacent calendar years).
    pub fn gaps(&self) -> Vec<i32> {
        self.year_pairs.iter().map(|(a, b)| b - a).collect()
    }

    /// Index of the largest value; earliest on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            if best.is_none_or(|b| *v > self.values[b]) {
                best = Some(i);
            }
        }
        best
    }
}

pub fn jsd_series(series: &YearlyTopicSeries) -> Result<JsdSeries, DivergenceError> {
    if series.len() < 2 {
        return Err(DivergenceError::TooFewYears(series.len()));
    }
    let mut out = JsdSeries { year_pairs: vec![], values: vec![] };
    for i in 1..series.len() {
        out.year_pairs.push((series.years[i - 1], series.years[i]));
        out.values.push(jsd(&series.distributions[i - 1], &series.distributions[i])?);
    }
    Ok(out)
}

/// Trailing rolling mean; the first `window − 1` entries average what is
/// available. A window of 0 or 1 returns the input.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let s = &values[lo..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn kl_identity_and_one_bit() {
        assert_eq!(kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap(), 1.0);
    }

    #[test]
    fn kl_infinite_off_support() {
        assert_eq!(kl_divergence(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(kl_divergence(&pv(&[1.0]), &pv(&[0.5, 0.5])), Err(DivergenceError::LengthMismatch(1, 2)));
        assert_eq!(jsd(&pv(&[1.0]), &pv(&[0.5, 0.5])), Err(DivergenceError::LengthMismatch(1, 2)));
    }

    #[test]
    fn jsd_endpoints() {
        assert_eq!(jsd(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 1.0);
        let p = pv(&[0.2, 0.3, 0.5]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
    }

    #[test]
    fn yearly_means() {
        let theta = array![[0.2, 0.8], [1.0, 0.0], [0.0, 1.0]];
        let s = yearly_distributions(theta.view(), &[1750, 1760, 1760]).unwrap();
        assert_eq!(s.years, vec![1750, 1760]);
        assert_eq!(s.distributions, vec![pv(&[0.2, 0.8]), pv(&[0.5, 0.5])]);
        assert_eq!(s.doc_counts, vec![1, 2]);
    }

    #[test]
    fn token_weighted_means() {
        let theta = array![[1.0, 0.0], [0.0, 1.0]];
        let s = yearly_distributions_weighted(theta.view(), &[1760, 1760], &[3.0, 1.0]).unwrap();
        assert_eq!(s.distributions, vec![pv(&[0.75, 0.25])]);
    }

    #[test]
    fn aggregation_errors() {
        let theta = ndarray::Array2::<f64>::zeros((0, 2));
        assert_eq!(yearly_distributions(theta.view(), &[]), Err(DivergenceError::NoDocuments));
        let theta = array![[1.0, 0.0]];
        assert!(matches!(yearly_distributions(theta.view(), &[1, 2]), Err(DivergenceError::Misaligned { .. })));
    }

    #[test]
    fn series_pairs_and_values() {
        let theta = array![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
        let s = yearly_distributions(theta.view(), &[1700, 1701, 1702]).unwrap();
        let j = jsd_series(&s).unwrap();
        assert_eq!(j.values, vec![1.0, 0.0]);
        assert_eq!(j.year_pairs, vec![(1700, 1701), (1701, 1702)]);
        assert_eq!(j.argmax(), Some(0));
    }

    #[test]
    fn series_skips_empty_years_and_records_gap() {
        let theta = array![[0.5, 0.5], [0.5, 0.5]];
        let s = yearly_distributions(theta.view(), &[1700, 1705]).unwrap();
        let j = jsd_series(&s).unwrap();
        assert_eq!(j.values, vec![0.0]);
        assert_eq!(j.gaps(), vec![5]);
    }

    #[test]
    fn single_year_series_is_error() {
        let theta = array![[0.5, 0.5]];
        let s = yearly_distributions(theta.view(), &[1700]).unwrap();
        assert_eq!(jsd_series(&s), Err(DivergenceError::TooFewYears(1)));
    }

    #[test]
    fn rolling_mean_window() {
        assert_eq!(rolling_mean(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(rolling_mean(&[1.0, 3.0], 0), vec![1.0, 3.0]);
    }
}
