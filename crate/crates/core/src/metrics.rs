//! Confusion classification and micro-averaged F1.
//!
//! Every cell of the selected objects × included frames counts once in a
//! single pooled confusion table. Degenerate denominators resolve to 1.0:
//! no positive predictions means perfect precision, no positive labels means
//! perfect recall, and an all-TN table has F1 = 1.0.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Dataset, GroundTruth, ModelDescriptor, SelectedObject};
use crate::providers::{predict, CacheStore, PredictionGrid, ProviderError};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("object {0:?} missing from prediction grid")]
    MissingFromGrid(String),
    #[error("object {0:?} has no reference labels and is not a spy")]
    MissingFromGroundTruth(String),
    #[error("frame {frame} out of range for {frames} frames")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConfusionCell {
    Tp,
    Tn,
    Fp,
    Fn,
}

impl ConfusionCell {
    pub fn classify(predicted: bool, actual: bool) -> Self {
        match (predicted, actual) {
            (true, true) => Self::Tp,
            (false, false) => Self::Tn,
            (true, false) => Self::Fp,
            (false, true) => Self::Fn,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, cell: ConfusionCell) {
        match cell {
            ConfusionCell::Tp => self.tp += 1,
            ConfusionCell::Tn => self.tn += 1,
            ConfusionCell::Fp => self.fp += 1,
            ConfusionCell::Fn => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn precision<T: Scalar>(&self) -> T {
        T::ratio_or(self.tp, self.tp + self.fp, T::one())
    }

    pub fn recall<T: Scalar>(&self) -> T {
        T::ratio_or(self.tp, self.tp + self.fn_, T::one())
    }

    /// `2tp / (2tp + fp + fn)`, the harmonic mean of precision and recall.
    pub fn f1<T: Scalar>(&self) -> T {
        T::ratio_or(2 * self.tp, 2 * self.tp + self.fp + self.fn_, T::one())
    }

    /// Exact rational F1.
    pub fn f1_exact(&self) -> Ratio<u64> {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            Ratio::from_integer(1)
        } else {
            Ratio::new(2 * self.tp, den)
        }
    }

    pub fn summarize<T: Scalar>(self) -> ConfusionSummary<T> {
        ConfusionSummary {
            counts: self,
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            tn: self.tn + rhs.tn,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary<T> {
    #[serde(flatten)]
    pub counts: ConfusionCounts,
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

/// Looks up both rows for an object, applying the all-false reference for
/// spies without labels.
fn rows<'a>(
    pred: &'a PredictionGrid,
    gt: &'a GroundTruth,
    object: &SelectedObject,
) -> Result<(&'a [bool], Option<&'a [bool]>), MetricsError> {
    let p = pred
        .row(&object.name)
        .ok_or_else(|| MetricsError::MissingFromGrid(object.name.clone()))?;
    let g = gt.row(&object.name);
    if g.is_none() && !object.is_spy {
        return Err(MetricsError::MissingFromGroundTruth(object.name.clone()));
    }
    Ok((p, g))
}

fn check_frames(frames: &[usize], n_frames: usize) -> Result<(), MetricsError> {
    match frames.iter().find(|&&f| f >= n_frames) {
        Some(&frame) => Err(MetricsError::FrameOutOfRange {
            frame,
            frames: n_frames,
        }),
        None => Ok(()),
    }
}

/// Classifies every (object, frame) cell of the selection.
pub fn classify_cells(
    pred: &PredictionGrid,
    gt: &GroundTruth,
    objects: &[SelectedObject],
    frames: &[usize],
) -> Result<BTreeMap<(String, usize), ConfusionCell>, MetricsError> {
    let mut out = BTreeMap::new();
    for object in objects {
        let (p, g) = rows(pred, gt, object)?;
        check_frames(frames, p.len())?;
        for &f in frames {
            let actual = g.is_some_and(|g| g[f]);
            out.insert((object.name.clone(), f), ConfusionCell::classify(p[f], actual));
        }
    }
    Ok(out)
}

/// Pooled confusion counts over the selection.
pub fn confusion_counts(
    pred: &PredictionGrid,
    gt: &GroundTruth,
    objects: &[SelectedObject],
    frames: &[usize],
) -> Result<ConfusionCounts, MetricsError> {
    let mut counts = ConfusionCounts::default();
    for object in objects {
        let (p, g) = rows(pred, gt, object)?;
        check_frames(frames, p.len())?;
        for &f in frames {
            counts.record(ConfusionCell::classify(p[f], g.is_some_and(|g| g[f])));
        }
    }
    Ok(counts)
}

/// Micro-averaged precision, recall and F1 over the selection.
pub fn micro_f1<T: Scalar>(
    pred: &PredictionGrid,
    gt: &GroundTruth,
    objects: &[SelectedObject],
    frames: &[usize],
) -> Result<ConfusionSummary<T>, MetricsError> {
    Ok(confusion_counts(pred, gt, objects, frames)?.summarize())
}

/// Confusion counts of a model over every segment, object and frame.
pub fn global_counts(
    model: &ModelDescriptor,
    dataset: &Dataset,
    caches: &CacheStore,
) -> Result<ConfusionCounts, MetricsError> {
    let objects: Vec<SelectedObject> = dataset.vocabulary.objects().iter().map(SelectedObject::new).collect();
    let mut total = ConfusionCounts::default();
    for segment in &dataset.segments {
        let gt = dataset
            .ground_truth(&segment.segment_id)
            .expect("validated dataset has labels for every segment");
        let grid = predict(model, segment, &objects, gt, caches)?;
        let frames: Vec<usize> = (0..segment.frame_count()).collect();
        total += confusion_counts(&grid, gt, &objects, &frames)?;
    }
    Ok(total)
}

/// Dataset-level F1 of a model: full vocabulary, all frames, never reduced
/// by evaluator frame exclusions.
pub fn f1_global<T: Scalar>(
    model: &ModelDescriptor,
    dataset: &Dataset,
    caches: &CacheStore,
) -> Result<T, MetricsError> {
    Ok(global_counts(model, dataset, caches)?.f1())
}
