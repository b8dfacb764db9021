use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    kruskal_wallis, linear_r2, mean, median, normalize_ratings, pairwise_posthoc, PairwiseComparison, StatsError,
    TestResult,
};
use crate::scalar::Scalar;

/// One evaluator rating with the hidden F1 over what they inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub model_id: String,
    pub segment_id: String,
    #[serde(rename = "rating")]
    pub raw_rating: u8,
    pub f1_star: f64,
    pub completion_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    rater_id: String,
    model_id: String,
    segment_id: String,
    rating: u8,
    f1_star: f64,
    completion_seconds: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("ratings CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("ratings CSV row {row}: rating {rating} is not one of 0, 10, ..., 100")]
    Rating { row: usize, rating: u8 },
    #[error("ratings CSV row {row}: f1_star {value} outside [0, 1]")]
    F1 { row: usize, value: f64 },
}

/// Reads `rater_id,model_id,segment_id,rating,f1_star,completion_seconds`.
pub fn read_ratings_csv<R: Read>(reader: R) -> Result<Vec<RatingRecord>, TableError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.rating > 100 || row.rating % 10 != 0 {
            return Err(TableError::Rating {
                row: line,
                rating: row.rating,
            });
        }
        if !(0.0..=1.0).contains(&row.f1_star) {
            return Err(TableError::F1 {
                row: line,
                value: row.f1_star,
            });
        }
        out.push(RatingRecord {
            rater_id: row.rater_id,
            model_id: row.model_id,
            segment_id: row.segment_id,
            raw_rating: row.rating,
            f1_star: row.f1_star,
            completion_seconds: row.completion_seconds,
            session_id: None,
            recorded_at: None,
        });
    }
    Ok(out)
}

pub fn write_ratings_csv<W: Write>(writer: W, records: &[RatingRecord]) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(CsvRow {
            rater_id: r.rater_id.clone(),
            model_id: r.model_id.clone(),
            segment_id: r.segment_id.clone(),
            rating: r.raw_rating,
            f1_star: r.f1_star,
            completion_seconds: r.completion_seconds,
        })?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// A value that may be undefined for the given data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome<V> {
    Computed { value: V },
    NotComputed { reason: String },
}

impl<V> Outcome<V> {
    pub fn value(&self) -> Option<&V> {
        match self {
            Self::Computed { value } => Some(value),
            Self::NotComputed { .. } => None,
        }
    }

    fn from_result(r: Result<V, StatsError>) -> Self {
        match r {
            Ok(value) => Self::Computed { value },
            Err(e) => Self::NotComputed { reason: e.to_string() },
        }
    }

    fn not_computed(reason: impl Into<String>) -> Self {
        Self::NotComputed { reason: reason.into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    /// Models left out of the model-level regression (fair-coin baselines).
    pub random_models: BTreeSet<String>,
    /// Dataset-level F1 per model. When absent, the mean recorded F1 over
    /// the model's trials is used as its x coordinate.
    pub model_f1: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow<T> {
    pub rater_id: String,
    pub model_id: String,
    pub segment_id: String,
    pub rating: u8,
    pub normalized: T,
    pub f1_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary<T> {
    pub model_id: String,
    pub trials: usize,
    pub median_normalized: T,
    pub mean_f1_star: T,
    /// x coordinate of the model-level regression.
    pub f1: T,
    pub is_random: bool,
    /// Trial-level fit of normalized rating against recorded F1.
    pub r2_rating_vs_f1_star: Outcome<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport<T> {
    pub records: usize,
    pub normalized: Vec<NormalizedRow<T>>,
    pub models: Vec<ModelSummary<T>>,
    pub kruskal_wallis: Outcome<TestResult<T>>,
    pub posthoc: Outcome<Vec<PairwiseComparison<T>>>,
    /// Median normalized rating against model F1, non-random models only.
    pub r2_median_rating_vs_f1: Outcome<T>,
}

impl<T: Scalar> AnalysisReport<T> {
    pub fn model(&self, model_id: &str) -> Option<&ModelSummary<T>> {
        self.models.iter().find(|m| m.model_id == model_id)
    }
}

/// Normalization, Kruskal–Wallis across models, Bonferroni post-hoc and
/// the rating/F1 regressions.
pub fn analyze<T: Scalar>(records: &[RatingRecord], options: &AnalysisOptions) -> AnalysisReport<T> {
    let keyed: Vec<(&str, T)> = records
        .iter()
        .map(|r| (r.rater_id.as_str(), T::from_count(r.raw_rating as u64)))
        .collect();
    let normalized_values = if keyed.is_empty() {
        Vec::new()
    } else {
        normalize_ratings(&keyed)
    };
    let normalized: Vec<NormalizedRow<T>> = records
        .iter()
        .zip(&normalized_values)
        .map(|(r, &n)| NormalizedRow {
            rater_id: r.rater_id.clone(),
            model_id: r.model_id.clone(),
            segment_id: r.segment_id.clone(),
            rating: r.raw_rating,
            normalized: n,
            f1_star: r.f1_star,
        })
        .collect();

    let mut by_model: BTreeMap<&str, Vec<&NormalizedRow<T>>> = BTreeMap::new();
    for row in &normalized {
        by_model.entry(row.model_id.as_str()).or_default().push(row);
    }

    let models: Vec<ModelSummary<T>> = by_model
        .iter()
        .map(|(&model_id, rows)| {
            let values: Vec<T> = rows.iter().map(|r| r.normalized).collect();
            let f1s: Vec<T> = rows.iter().map(|r| T::from_f64_lossy(r.f1_star)).collect();
            let mean_f1_star = mean(&f1s).expect("non-empty group");
            let points: Vec<(T, T)> = f1s.iter().copied().zip(values.iter().copied()).collect();
            ModelSummary {
                model_id: model_id.to_string(),
                trials: rows.len(),
                median_normalized: median(&values).expect("non-empty group"),
                mean_f1_star,
                f1: options
                    .model_f1
                    .get(model_id)
                    .map(|&f| T::from_f64_lossy(f))
                    .unwrap_or(mean_f1_star),
                is_random: options.random_models.contains(model_id),
                r2_rating_vs_f1_star: Outcome::from_result(linear_r2(&points)),
            }
        })
        .collect();

    let groups: Vec<(String, Vec<T>)> = by_model
        .iter()
        .map(|(m, rows)| (m.to_string(), rows.iter().map(|r| r.normalized).collect()))
        .collect();
    let group_values: Vec<&Vec<T>> = groups.iter().map(|g| &g.1).collect();
    let kruskal_wallis = Outcome::from_result(kruskal_wallis(&group_values));
    let posthoc = if kruskal_wallis.value().is_some() {
        Outcome::from_result(pairwise_posthoc(&groups))
    } else {
        Outcome::not_computed("omnibus test not computed")
    };

    let points: Vec<(T, T)> = models
        .iter()
        .filter(|m| !m.is_random)
        .map(|m| (m.f1, m.median_normalized))
        .collect();
    let r2_median_rating_vs_f1 = if points.len() < 2 {
        Outcome::not_computed(format!("need at least 2 non-random models, got {}", points.len()))
    } else {
        Outcome::from_result(linear_r2(&points))
    };

    AnalysisReport {
        records: records.len(),
        normalized,
        models,
        kruskal_wallis,
        posthoc,
        r2_median_rating_vs_f1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(rater: &str, model: &str, rating: u8, f1: f64) -> RatingRecord {
        RatingRecord {
            rater_id: rater.into(),
            model_id: model.into(),
            segment_id: "s".into(),
            raw_rating: rating,
            f1_star: f1,
            completion_seconds: None,
            session_id: None,
            recorded_at: None,
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let records = vec![rec("r1", "gt", 90, 1.0), rec("r1", "random", 20, 0.31)];
        let mut buf = Vec::new();
        write_ratings_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("rater_id,model_id,segment_id,rating,f1_star,completion_seconds\n"));
        assert_eq!(read_ratings_csv(buf.as_slice()).unwrap(), records);

        let bad = "rater_id,model_id,segment_id,rating,f1_star,completion_seconds\nr,m,s,55,0.5,\n";
        assert!(matches!(
            read_ratings_csv(bad.as_bytes()),
            Err(TableError::Rating { row: 2, rating: 55 })
        ));
        let garbage = "rater_id,model_id,segment_id,rating,f1_star,completion_seconds\nr,m,s,x,0.5,\n";
        assert!(matches!(read_ratings_csv(garbage.as_bytes()), Err(TableError::Csv(_))));
    }

    #[test]
    fn single_rater_constant_ratings_are_not_computed() {
        let records = vec![rec("r", "a", 50, 0.5), rec("r", "b", 50, 0.7), rec("r", "a", 50, 0.6)];
        let report: AnalysisReport<f64> = analyze(&records, &AnalysisOptions::default());
        assert!(report.normalized.iter().all(|r| r.normalized == 0.5));
        assert!(report.kruskal_wallis.value().is_none());
        assert!(report.posthoc.value().is_none());
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["kruskal_wallis"]["status"], "not-computed");
    }

    #[test]
    fn single_model_has_no_model_level_r2() {
        let records = vec![rec("r", "a", 50, 0.5), rec("r", "a", 70, 0.7)];
        let report: AnalysisReport<f64> = analyze(&records, &AnalysisOptions::default());
        assert!(report.r2_median_rating_vs_f1.value().is_none());
    }
}
