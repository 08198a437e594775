//! External annual series (e.g. GDP per capita) aligned by year with topic
//! prevalence for overlay charts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column \"{0}\"")]
    MissingColumn(String),
    #[error("row {row}: cannot parse {column} value \"{value}\"")]
    BadValue { row: usize, column: String, value: String },
    #[error("duplicate year {0}")]
    DuplicateYear(i32),
    #[error("series has no data points")]
    EmptySeries,
    #[error("topic series and external series share no years")]
    EmptyOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSeries {
    pub name: String,
    pub unit: String,
    /// Strictly increasing years with finite values.
    pub points: Vec<(i32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub year_column: String,
    pub value_column: String,
    /// Keep only rows whose `column` equals `value`.
    pub filter: Option<(String, String)>,
    pub name: String,
    pub unit: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            year_column: "year".into(),
            value_column: "gdppc".into(),
            filter: None,
            name: "GDP per capita".into(),
            unit: "2011 US$".into(),
        }
    }
}

/// Loads a comma- or tab-separated file with a header row. The delimiter is
/// a tab when the header line contains one. Rows with an empty value are
/// treated as gaps and skipped; row numbers in errors count the header as 1.
pub fn load_series(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<ExternalSeries, AlignError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| AlignError::Io { path: path.display().to_string(), source: e })?;
    parse_series(&text, opts)
}

pub fn parse_series(text: &str, opts: &LoadOptions) -> Result<ExternalSeries, AlignError> {
    let delimiter = if text.lines().next().is_some_and(|h| h.contains('\t')) { b'\t' } else { b',' };
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| AlignError::MissingColumn(name.to_owned()))
    };
    let year_idx = col(&opts.year_column)?;
    let value_idx = col(&opts.value_column)?;
    let filter = match &opts.filter {
        Some((c, v)) => Some((col(c)?, v.as_str())),
        None => None,
    };

    let mut points: BTreeMap<i32, f64> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        if let Some((fi, fv)) = filter {
            if rec.get(fi) != Some(fv) {
                continue;
            }
        }
        let raw_year = rec.get(year_idx).unwrap_or("");
        let raw_value = rec.get(value_idx).unwrap_or("");
        if raw_value.is_empty() {
            continue;
        }
        let year: i32 = raw_year.parse().map_err(|_| AlignError::BadValue {
            row,
            column: opts.year_column.clone(),
            value: raw_year.to_owned(),
        })?;
        let value: f64 = raw_value.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| AlignError::BadValue {
            row,
            column: opts.value_column.clone(),
            value: raw_value.to_owned(),
        })?;
        if points.insert(year, value).is_some() {
            return Err(AlignError::DuplicateYear(year));
        }
    }
    if points.is_empty() {
        return Err(AlignError::EmptySeries);
    }
    Ok(ExternalSeries { name: opts.name.clone(), unit: opts.unit.clone(), points: points.into_iter().collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    MinMax,
    ZScore,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlignOptions {
    pub normalization: Normalization,
    /// Fill external gaps inside its year range by linear interpolation.
    pub interpolate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedOverlay {
    pub years: Vec<i32>,
    pub topic_values: Vec<f64>,
    pub external_values: Vec<f64>,
    /// True where the external value was interpolated.
    pub interpolated: Vec<bool>,
    pub normalization: Normalization,
    /// A series was constant and normalized to zeros.
    pub topic_degenerate: bool,
    pub external_degenerate: bool,
}

/// Joins on years, then normalizes each series independently.
pub fn align(
    topic_series: &[(i32, f64)],
    external: &ExternalSeries,
    opts: &AlignOptions,
) -> Result<AlignedOverlay, AlignError> {
    let ext: BTreeMap<i32, f64> = external.points.iter().copied().collect();
    let (first, last) = match (ext.keys().next(), ext.keys().next_back()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(AlignError::EmptySeries),
    };
    let mut years = Vec::new();
    let mut topic = Vec::new();
    let mut external_values = Vec::new();
    let mut interpolated = Vec::new();
    for &(year, value) in topic_series {
        let ext_value = match ext.get(&year) {
            Some(&v) => Some((v, false)),
            None if opts.interpolate && year > first && year < last => {
                let (&y0, &v0) = ext.range(..year).next_back().expect("year above first anchor");
                let (&y1, &v1) = ext.range(year..).next().expect("year below last anchor");
                let t = (year - y0) as f64 / (y1 - y0) as f64;
                Some((v0 + t * (v1 - v0), true))
            }
            None => None,
        };
        if let Some((v, interp)) = ext_value {
            years.push(year);
            topic.push(value);
            external_values.push(v);
            interpolated.push(interp);
        }
    }
    if years.is_empty() {
        return Err(AlignError::EmptyOverlap);
    }
    let (topic_values, topic_degenerate) = normalize(&topic, opts.normalization);
    let (external_values, external_degenerate) = normalize(&external_values, opts.normalization);
    if topic_degenerate || external_degenerate {
        log::warn!("overlay: constant series normalized to 0");
    }
    Ok(AlignedOverlay {
        years,
        topic_values,
        external_values,
        interpolated,
        normalization: opts.normalization,
        topic_degenerate,
        external_degenerate,
    })
}

/// Returns the normalized values and whether the series was degenerate
/// (constant), in which case min-max and z-score map every value to 0.
pub fn normalize(values: &[f64], method: Normalization) -> (Vec<f64>, bool) {
    match method {
        Normalization::None => (values.to_vec(), false),
        Normalization::MinMax => {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max > min {
                (values.iter().map(|v| ((v - min) / (max - min)).clamp(0.0, 1.0)).collect(), false)
            } else {
                (vec![0.0; values.len()], true)
            }
        }
        Normalization::ZScore => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                (values.iter().map(|v| (v - mean) / sd).collect(), false)
            } else {
                (vec![0.0; values.len()], true)
            }
        }
    }
}
