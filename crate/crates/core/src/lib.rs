//! Evaluation engine for multi-object recognition models rated through
//! interactive binary heatmaps.
//!
//! A model's predictions for one video segment form a boolean
//! object × keyframe grid. Evaluators inspect that grid in a [`session`],
//! probe it with spy objects, toggle cells they believe are wrong and rate
//! the model. When reference labels exist, [`metrics`] computes the hidden
//! micro-averaged F1 and [`stats`] checks that ratings track it.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod domain;
pub mod fixture;
pub mod metrics;
pub mod patterns;
pub mod providers;
pub mod scalar;
pub mod scheduler;
pub mod session;
pub mod simrater;
pub mod stats;

pub use domain::{
    load_dataset, validate_vocabulary_membership, Dataset, DatasetError, GroundTruth, Keyframe, ModelDescriptor,
    ModelKind, Segment, SelectedObject, TaskDescriptor, Vocabulary,
};
pub use providers::{predict, CacheStore, PredictionCache, PredictionGrid, ProviderError};
pub use scalar::Scalar;
pub use session::{EvalSession, Session, SessionError, SessionEvent};
pub use stats::RatingRecord;

/// Micro-averaged confusion summary in double precision.
pub type ConfusionSummary = metrics::ConfusionSummary<f64>;
/// Single-precision confusion summary.
pub type ConfusionSummaryF32 = metrics::ConfusionSummary<f32>;
/// Hypothesis test outcome in double precision.
pub type TestResult = stats::TestResult<f64>;
/// Heatmap pattern report in double precision.
pub type PatternReport = patterns::PatternReport<f64>;
/// Analysis report over a ratings table.
pub type AnalysisReport = stats::AnalysisReport<f64>;
