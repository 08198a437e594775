//! Topic prevalence over time, OLS trend lines and the hot / cold / flat
//! classification derived from them.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::divergence::YearlyTopicSeries;
use crate::numeric::compensated_sum;

#[derive(Debug, Error, PartialEq)]
pub enum TrendError {
    #[error("topic {topic} out of range (series has {topics} topics)")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("OLS needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("years have zero variance")]
    ZeroVariance,
    #[error("duplicate year {0}")]
    DuplicateYear(i32),
}

/// The topic's share in each yearly distribution, chronological.
pub fn topic_prevalence_series(series: &YearlyTopicSeries, topic: usize) -> Result<Vec<(i32, f64)>, TrendError> {
    let k = series.n_topics();
    if topic >= k {
        return Err(TrendError::TopicOutOfRange { topic, topics: k });
    }
    Ok(series.years.iter().zip(&series.distributions).map(|(&y, p)| (y, p[topic])).collect())
}

/// Least-squares line of value on year with slope inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsTrend {
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub t_statistic: f64,
    /// Two-sided p-value from Student's t with n − 2 degrees of freedom.
    pub p_value: f64,
    pub residual_ss: f64,
    pub mean_value: f64,
    /// `slope × (period end − period start)`.
    pub delta: f64,
}

pub fn ols_trend(points: &[(i32, f64)], period: (i32, i32)) -> Result<OlsTrend, TrendError> {
    let n = points.len();
    if n < 3 {
        return Err(TrendError::TooFewPoints(n));
    }
    let mut years: Vec<i32> = points.iter().map(|p| p.0).collect();
    years.sort_unstable();
    if let Some(w) = years.windows(2).find(|w| w[0] == w[1]) {
        return Err(TrendError::DuplicateYear(w[0]));
    }
    let nf = n as f64;
    let x_mean = compensated_sum(points.iter().map(|p| p.0 as f64)) / nf;
    let y_mean = compensated_sum(points.iter().map(|p| p.1)) / nf;
    let sxx = compensated_sum(points.iter().map(|p| (p.0 as f64 - x_mean).powi(2)));
    let sxy = compensated_sum(points.iter().map(|&(x, y)| (x as f64 - x_mean) * (y - y_mean)));
    if sxx == 0.0 {
        return Err(TrendError::ZeroVariance);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let residual_ss = compensated_sum(points.iter().map(|&(x, y)| {
        let r = y - y_mean - slope * (x as f64 - x_mean);
        r * r
    }));
    let df = nf - 2.0;
    let slope_stderr = (residual_ss / df / sxx).sqrt();
    let (t_statistic, p_value) = if slope_stderr > 0.0 {
        let t = slope / slope_stderr;
        (t, two_sided_p(t, df))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        // exact fit with nonzero slope
        (slope.signum() * f64::INFINITY, 0.0)
    };
    Ok(OlsTrend {
        n,
        slope,
        intercept,
        slope_stderr,
        t_statistic,
        p_value,
        residual_ss,
        mean_value: y_mean,
        delta: slope * (period.1 - period.0) as f64,
    })
}

/// Two-sided tail probability `P(|T| ≥ |t|)` for Student's t.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("degrees of freedom are positive");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Hot,
    Cold,
    Flat,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Hot => "hot",
            Classification::Cold => "cold",
            Classification::Flat => "flat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRule {
    pub significance: f64,
    pub delta_threshold: f64,
}

impl Default for ClassifyRule {
    fn default() -> Self {
        ClassifyRule { significance: 0.05, delta_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub topic: usize,
    pub mean_prevalence: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub delta: f64,
    pub classification: Classification,
}

/// Hot: significant with delta ≥ +threshold. Cold: significant with
/// delta ≤ −threshold. Flat otherwise.
pub fn classify(p_value: f64, delta: f64, rule: &ClassifyRule) -> Classification {
    if p_value < rule.significance && delta >= rule.delta_threshold {
        Classification::Hot
    } else if p_value < rule.significance && delta <= -rule.delta_threshold {
        Classification::Cold
    } else {
        Classification::Flat
    }
}

/// Fits a trend for every topic of the yearly series.
pub fn topic_trends(
    series: &YearlyTopicSeries,
    period: (i32, i32),
    rule: &ClassifyRule,
) -> Result<Vec<TrendResult>, TrendError> {
    (0..series.n_topics())
        .map(|k| {
            let points = topic_prevalence_series(series, k)?;
            let fit = ols_trend(&points, period)?;
            Ok(TrendResult {
                topic: k,
                mean_prevalence: fit.mean_value,
                slope: fit.slope,
                slope_stderr: fit.slope_stderr,
                t_statistic: fit.t_statistic,
                p_value: fit.p_value,
                delta: fit.delta,
                classification: classify(fit.p_value, fit.delta, rule),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::ProbVector;

    #[test]
    fn constant_series_has_zero_slope() {
        let pts: Vec<_> = (1700..=1900).map(|y| (y, 0.2)).collect();
        let t = ols_trend(&pts, (1700, 1900)).unwrap();
        assert_eq!(t.slope, 0.0);
        assert_eq!(t.delta, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn exact_line_recovered() {
        let pts: Vec<_> = (1700..=1900).map(|y| (y, 0.001 * (y - 1700) as f64)).collect();
        let t = ols_trend(&pts, (1700, 1900)).unwrap();
        assert!((t.slope - 0.001).abs() < 1e-12);
        assert!(t.residual_ss <= 1e-18);
        assert!((t.delta - 0.2).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(ols_trend(&[(1700, 0.1), (1701, 0.2)], (1700, 1900)), Err(TrendError::TooFewPoints(2)));
        assert_eq!(
            ols_trend(&[(1700, 0.1), (1701, 0.2), (1701, 0.3)], (1700, 1900)),
            Err(TrendError::DuplicateYear(1701))
        );
    }

    #[test]
    fn classification_rules() {
        let rule = ClassifyRule::default();
        assert_eq!(classify(0.0005, 0.37, &rule), Classification::Hot);
        assert_eq!(classify(0.9, 0.0, &rule), Classification::Flat);
        assert_eq!(classify(0.01, -0.27, &rule), Classification::Cold);
        assert_eq!(classify(0.01, -0.13, &rule), Classification::Cold);
        let strict = ClassifyRule { delta_threshold: 0.15, ..rule };
        assert_eq!(classify(0.01, -0.13, &strict), Classification::Flat);
        // large but insignificant change stays flat
        assert_eq!(classify(0.2, 0.5, &rule), Classification::Flat);
    }

    #[test]
    fn prevalence_series_indexing() {
        let s = YearlyTopicSeries {
            years: vec![1700],
            distributions: vec![ProbVector::new(vec![0.3, 0.7]).unwrap()],
            doc_counts: vec![1],
        };
        assert_eq!(topic_prevalence_series(&s, 0).unwrap(), vec![(1700, 0.3)]);
        assert!(topic_prevalence_series(&s, 2).is_err());
    }

    #[test]
    fn uniform_years_give_constant_series() {
        let s = YearlyTopicSeries {
            years: (1700..1710).collect(),
            distributions: (0..10).map(|_| ProbVector::new(vec![0.1; 10]).unwrap()).collect(),
            doc_counts: vec![1; 10],
        };
        for k in 0..10 {
            assert!(topic_prevalence_series(&s, k).unwrap().iter().all(|&(_, v)| v == 0.1));
        }
    }
}
