//! Rating analysis: per-rater normalization, rank tests and regression fit.

mod nonparametric;
mod report;

pub use nonparametric::{
    average_ranks, kruskal_wallis, mann_whitney_u, pairwise_posthoc, PairwiseComparison, TestMethod, TestResult,
    SIGNIFICANCE_LEVEL,
};
pub use report::{
    analyze, read_ratings_csv, write_ratings_csv, AnalysisOptions, AnalysisReport, ModelSummary, NormalizedRow,
    Outcome, RatingRecord,
};

use std::collections::HashMap;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("sample {0} is empty")]
    EmptySample(usize),
    #[error("all observations are tied; the statistic is undefined")]
    AllTied,
    #[error("all x values are equal; the slope is undefined")]
    ConstantX,
    #[error("non-finite observation")]
    NonFinite,
}

/// Standard median: middle value, or mean of the two middle values.
pub fn median<T: Scalar>(sample: &[T]) -> Result<T, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample(0));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * T::half()
    })
}

pub fn mean<T: Scalar>(sample: &[T]) -> Option<T> {
    if sample.is_empty() {
        return None;
    }
    let sum = sample.iter().fold(T::zero(), |a, &b| a + b);
    Some(sum / T::from_count(sample.len() as u64))
}

/// Removes each rater's mean, then min-max scales the pooled centered
/// values to [0, 1]. Output is aligned with the input. When every centered
/// value is equal the result is 0.5 throughout.
pub fn normalize_ratings<T: Scalar, K: AsRef<str>>(ratings: &[(K, T)]) -> Vec<T> {
    let mut sums: HashMap<&str, (T, u64)> = HashMap::new();
    for (rater, value) in ratings {
        let e = sums.entry(rater.as_ref()).or_insert((T::zero(), 0));
        e.0 = e.0 + *value;
        e.1 += 1;
    }
    let centered: Vec<T> = ratings
        .iter()
        .map(|(rater, value)| {
            let (sum, n) = sums[rater.as_ref()];
            *value - sum / T::from_count(n)
        })
        .collect();
    let min = centered.iter().copied().fold(T::infinity(), T::min);
    let max = centered.iter().copied().fold(T::neg_infinity(), T::max);
    let range = max - min;
    centered
        .into_iter()
        .map(|c| {
            if range > T::zero() {
                (c - min) / range
            } else {
                T::half()
            }
        })
        .collect()
}

/// Ordinary least squares coefficient of determination `1 - SS_res/SS_tot`.
/// Zero when `y` is constant.
pub fn linear_r2<T: Scalar>(points: &[(T, T)]) -> Result<T, StatsError> {
    if points.len() < 2 {
        return Err(StatsError::TooFew {
            what: "points",
            needed: 2,
            got: points.len(),
        });
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = T::from_count(points.len() as u64);
    let x_mean = points.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let y_mean = points.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in points {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(StatsError::ConstantX);
    }
    if syy == T::zero() {
        return Ok(T::zero());
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res = points.iter().fold(T::zero(), |a, &(x, y)| {
        let r = y - (intercept + slope * x);
        a + r * r
    });
    Ok(T::one() - ss_res / syy)
}
