//! Prediction grids for the five model conditions.
//!
//! Stochastic providers draw every cell from a keyed stream: the uniform
//! variate for a cell is the first 8 bytes (little endian) of
//! `SHA-256(seed_le64 ‖ len_le64(model_id) ‖ model_id ‖ len_le64(segment_id)
//! ‖ segment_id ‖ len_le64(object) ‖ object ‖ frame_le64)`, shifted right by
//! 11 and scaled by 2^-53. A cell is `true` when that variate is below the
//! Bernoulli probability.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{Dataset, GroundTruth, ModelDescriptor, ModelKind, Segment, SelectedObject};

#[derive(Debug, Error, PartialEq)]
pub enum ProviderError {
    #[error("malformed prediction cache JSON: {0}")]
    Json(String),
    #[error("no objects requested")]
    NoObjects,
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("cache is for dataset {found:?}, expected {expected:?}")]
    DatasetMismatch { expected: String, found: String },
    #[error("predictions.{object}: length {found} does not match {expected} frames")]
    DimensionMismatch {
        object: String,
        expected: usize,
        found: usize,
    },
    #[error("no cached predictions for model {model_id:?} on segment {segment_id:?}")]
    MissingCache { model_id: String, segment_id: String },
    #[error("object {0:?} is neither in the vocabulary nor a registered spy")]
    UnknownObject(String),
    #[error("cache for model {model_id:?} has no row for object {object:?}")]
    MissingCachedObject { model_id: String, object: String },
    #[error("flip probability {0} outside [0, 1]")]
    InvalidProbability(f64),
}

/// Boolean object × frame predictions of one model on one segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionGrid {
    pub model_id: String,
    pub segment_id: String,
    pub cells: BTreeMap<String, Vec<bool>>,
    /// Spy rows absent from the model's output, filled with `false`.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub missing_spy_rows: BTreeSet<String>,
}

impl PredictionGrid {
    pub fn row(&self, object: &str) -> Option<&[bool]> {
        self.cells.get(object).map(Vec::as_slice)
    }

    pub fn has_warnings(&self) -> bool {
        !self.missing_spy_rows.is_empty()
    }
}

/// A pre-fetched model response for one segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionCache {
    pub model_id: String,
    pub dataset_id: String,
    pub segment_id: String,
    pub predictions: BTreeMap<String, Vec<bool>>,
}

/// Parses a cache file and checks it against the dataset's segment shape.
pub fn load_prediction_cache(bytes: &[u8], dataset: &Dataset) -> Result<PredictionCache, ProviderError> {
    let cache: PredictionCache = serde_json::from_slice(bytes).map_err(|e| ProviderError::Json(e.to_string()))?;
    validate_cache(&cache, dataset)?;
    Ok(cache)
}

pub fn validate_cache(cache: &PredictionCache, dataset: &Dataset) -> Result<(), ProviderError> {
    if cache.dataset_id != dataset.dataset_id {
        return Err(ProviderError::DatasetMismatch {
            expected: dataset.dataset_id.clone(),
            found: cache.dataset_id.clone(),
        });
    }
    let segment = dataset
        .segment(&cache.segment_id)
        .ok_or_else(|| ProviderError::UnknownSegment(cache.segment_id.clone()))?;
    for (object, row) in &cache.predictions {
        if row.len() != segment.frame_count() {
            return Err(ProviderError::DimensionMismatch {
                object: object.clone(),
                expected: segment.frame_count(),
                found: row.len(),
            });
        }
    }
    Ok(())
}

/// Cached responses keyed by `(model_id, segment_id)`.
#[derive(Debug, Clone, Default)]
pub struct CacheStore {
    entries: HashMap<(String, String), PredictionCache>,
}

impl CacheStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cache: PredictionCache) {
        self.entries
            .insert((cache.model_id.clone(), cache.segment_id.clone()), cache);
    }

    pub fn get(&self, model_id: &str, segment_id: &str) -> Option<&PredictionCache> {
        self.entries.get(&(model_id.to_string(), segment_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Uniform variate in [0, 1) for one grid cell.
pub fn keyed_uniform(seed: u64, model_id: &str, segment_id: &str, object: &str, frame: usize) -> f64 {
    let word = keyed_u64(seed, &[model_id, segment_id, object], frame as u64);
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// First 8 digest bytes of `seed ‖ (len ‖ part)* ‖ tail`, little endian.
pub fn keyed_u64(seed: u64, parts: &[&str], tail: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hasher.update(tail.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn keyed_bernoulli(p: f64, seed: u64, model_id: &str, segment_id: &str, object: &str, frame: usize) -> bool {
    keyed_uniform(seed, model_id, segment_id, object, frame) < p
}

/// Reference row for an object: its label vector, all-false for spies the
/// labels do not cover.
fn reference_row(gt: &GroundTruth, object: &SelectedObject, n_frames: usize) -> Result<Vec<bool>, ProviderError> {
    match gt.row(&object.name) {
        Some(row) => Ok(row.to_vec()),
        None if object.is_spy => Ok(vec![false; n_frames]),
        None => Err(ProviderError::UnknownObject(object.name.clone())),
    }
}

/// Predicts the requested object rows for one segment.
pub fn predict(
    model: &ModelDescriptor,
    segment: &Segment,
    objects: &[SelectedObject],
    gt: &GroundTruth,
    caches: &CacheStore,
) -> Result<PredictionGrid, ProviderError> {
    if objects.is_empty() {
        return Err(ProviderError::NoObjects);
    }
    let n_frames = segment.frame_count();
    let model_id = model.model_id.as_str();
    let segment_id = segment.segment_id.as_str();
    let mut cells = BTreeMap::new();
    let mut missing_spy_rows = BTreeSet::new();

    match &model.kind {
        ModelKind::GroundTruth => {
            for obj in objects {
                cells.insert(obj.name.clone(), reference_row(gt, obj, n_frames)?);
            }
        }
        ModelKind::Random { seed } => {
            for obj in objects {
                if !obj.is_spy && gt.row(&obj.name).is_none() {
                    return Err(ProviderError::UnknownObject(obj.name.clone()));
                }
                let row = (0..n_frames)
                    .map(|f| keyed_bernoulli(0.5, *seed, model_id, segment_id, &obj.name, f))
                    .collect();
                cells.insert(obj.name.clone(), row);
            }
        }
        ModelKind::SyntheticNoisy { flip_probability, seed } => {
            if !(0.0..=1.0).contains(flip_probability) {
                return Err(ProviderError::InvalidProbability(*flip_probability));
            }
            for obj in objects {
                let truth = reference_row(gt, obj, n_frames)?;
                let row = truth
                    .iter()
                    .enumerate()
                    .map(|(f, &t)| t ^ keyed_bernoulli(*flip_probability, *seed, model_id, segment_id, &obj.name, f))
                    .collect();
                cells.insert(obj.name.clone(), row);
            }
        }
        ModelKind::Cached { .. } => {
            let cache = caches
                .get(model_id, segment_id)
                .ok_or_else(|| ProviderError::MissingCache {
                    model_id: model_id.to_string(),
                    segment_id: segment_id.to_string(),
                })?;
            for obj in objects {
                match cache.predictions.get(&obj.name) {
                    Some(row) if row.len() == n_frames => {
                        cells.insert(obj.name.clone(), row.clone());
                    }
                    Some(row) => {
                        return Err(ProviderError::DimensionMismatch {
                            object: obj.name.clone(),
                            expected: n_frames,
                            found: row.len(),
                        })
                    }
                    None if obj.is_spy => {
                        missing_spy_rows.insert(obj.name.clone());
                        cells.insert(obj.name.clone(), vec![false; n_frames]);
                    }
                    None => {
                        return Err(ProviderError::MissingCachedObject {
                            model_id: model_id.to_string(),
                            object: obj.name.clone(),
                        })
                    }
                }
            }
        }
    }

    Ok(PredictionGrid {
        model_id: model_id.to_string(),
        segment_id: segment_id.to_string(),
        cells,
        missing_spy_rows,
    })
}
