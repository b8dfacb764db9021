//! Data directory layout:
//!
//! ```text
//! datasets/<dataset_id>.json        dataset manifests
//! models.json                       list of model descriptors
//! caches/<cache_ref>/<segment>.json cached predictions of cached-kind models
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ikiwisi_core::fixture::FixtureBundle;
use ikiwisi_core::providers::{load_prediction_cache, PredictionCache};
use ikiwisi_core::{load_dataset, CacheStore, Dataset, ModelDescriptor, ModelKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("data directory {0} has no datasets")]
    NoDatasets(PathBuf),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, message: impl ToString) -> DataError {
    DataError::Invalid {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Everything loaded from a data directory. Immutable once built.
#[derive(Debug, Clone)]
pub struct DataSet {
    pub datasets: BTreeMap<String, Dataset>,
    pub models: Vec<ModelDescriptor>,
    /// Cached predictions per dataset id.
    pub caches: BTreeMap<String, CacheStore>,
}

impl DataSet {
    pub fn model(&self, model_id: &str) -> Option<&ModelDescriptor> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    pub fn caches_for(&self, dataset_id: &str) -> &CacheStore {
        static EMPTY: std::sync::OnceLock<CacheStore> = std::sync::OnceLock::new();
        self.caches
            .get(dataset_id)
            .unwrap_or_else(|| EMPTY.get_or_init(CacheStore::new))
    }

    /// Datasets containing `segment_id`.
    pub fn datasets_with_segment(&self, segment_id: &str) -> Vec<&Dataset> {
        self.datasets
            .values()
            .filter(|d| d.segment(segment_id).is_some())
            .collect()
    }
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io(dir)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_data_dir(root: &Path) -> Result<DataSet, DataError> {
    let mut datasets = BTreeMap::new();
    let ds_dir = root.join("datasets");
    for path in json_files(&ds_dir)? {
        let bytes = fs::read(&path).map_err(io(&path))?;
        let ds = load_dataset(&bytes).map_err(|e| invalid(&path, e))?;
        if datasets.contains_key(&ds.dataset_id) {
            return Err(invalid(&path, format!("duplicate dataset id {:?}", ds.dataset_id)));
        }
        datasets.insert(ds.dataset_id.clone(), ds);
    }
    if datasets.is_empty() {
        return Err(DataError::NoDatasets(root.to_path_buf()));
    }

    let models_path = root.join("models.json");
    let bytes = fs::read(&models_path).map_err(io(&models_path))?;
    let models: Vec<ModelDescriptor> = serde_json::from_slice(&bytes).map_err(|e| invalid(&models_path, e))?;
    let mut seen = BTreeSet::new();
    for m in &models {
        if !seen.insert(m.model_id.as_str()) {
            return Err(invalid(&models_path, format!("duplicate model id {:?}", m.model_id)));
        }
        if let ModelKind::SyntheticNoisy { flip_probability, .. } = m.kind {
            if !(0.0..=1.0).contains(&flip_probability) {
                return Err(invalid(
                    &models_path,
                    format!("{}: flip probability outside [0, 1]", m.model_id),
                ));
            }
        }
    }

    let mut caches: BTreeMap<String, CacheStore> = BTreeMap::new();
    for m in &models {
        let ModelKind::Cached { cache_ref } = &m.kind else {
            continue;
        };
        let dir = root.join("caches").join(cache_ref);
        for path in json_files(&dir)? {
            let bytes = fs::read(&path).map_err(io(&path))?;
            let raw: PredictionCache = serde_json::from_slice(&bytes).map_err(|e| invalid(&path, e))?;
            let ds = datasets
                .get(&raw.dataset_id)
                .ok_or_else(|| invalid(&path, format!("unknown dataset {:?}", raw.dataset_id)))?;
            let cache = load_prediction_cache(&bytes, ds).map_err(|e| invalid(&path, e))?;
            if cache.model_id != m.model_id {
                return Err(invalid(
                    &path,
                    format!("cache is for model {:?}, expected {:?}", cache.model_id, m.model_id),
                ));
            }
            caches.entry(cache.dataset_id.clone()).or_default().insert(cache);
        }
    }
    Ok(DataSet {
        datasets,
        models,
        caches,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io(parent))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| invalid(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

/// Writes a generated fixture in data directory layout.
pub fn write_data_dir(root: &Path, bundle: &FixtureBundle) -> Result<(), DataError> {
    let ds = &bundle.dataset;
    write_json(
        &root.join("datasets").join(format!("{}.json", ds.dataset_id)),
        &ds.to_manifest(),
    )?;
    write_json(&root.join("models.json"), &bundle.models)?;
    for cache in &bundle.caches {
        let cache_ref = bundle
            .models
            .iter()
            .find_map(|m| match &m.kind {
                ModelKind::Cached { cache_ref } if m.model_id == cache.model_id => Some(cache_ref.as_str()),
                _ => None,
            })
            .unwrap_or(cache.model_id.as_str());
        write_json(
            &root
                .join("caches")
                .join(cache_ref)
                .join(format!("{}.json", cache.segment_id)),
            cache,
        )?;
    }
    Ok(())
}
