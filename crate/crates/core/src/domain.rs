//! Models, videos, keyframes and the object vocabulary, plus the dataset
//! manifest that carries them.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("malformed manifest JSON: {0}")]
    Json(String),
    #[error("{path}: empty object name")]
    EmptyName { path: String },
    #[error("{path}: duplicate object name {name:?}")]
    DuplicateObject { path: String, name: String },
    #[error("vocabulary must contain at least one object")]
    EmptyVocabulary,
    #[error("{path}: duplicate segment id {id:?}")]
    DuplicateSegment { path: String, id: String },
    #[error("{path}: segment has no frames")]
    NoFrames { path: String },
    #[error("{path}: frame index {found} does not match position {expected}")]
    FrameIndex {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}: label length mismatch (expected {expected}, found {found})")]
    LabelLength {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}: unknown object {name:?} in labels")]
    UnknownObject { path: String, name: String },
    #[error("{path}: missing label vector for object {name:?}")]
    MissingLabels { path: String, name: String },
}

/// The ordered object domain of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    objects: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary, trimming names. Names are case-sensitive.
    pub fn new<I, S>(names: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut objects = Vec::new();
        let mut index = HashMap::new();
        for (i, raw) in names.into_iter().enumerate() {
            let path = format!("vocabulary[{i}]");
            let name = raw.as_ref().trim();
            if name.is_empty() {
                return Err(DatasetError::EmptyName { path });
            }
            if index.insert(name.to_string(), objects.len()).is_some() {
                return Err(DatasetError::DuplicateObject {
                    path,
                    name: name.to_string(),
                });
            }
            objects.push(name.to_string());
        }
        if objects.is_empty() {
            return Err(DatasetError::EmptyVocabulary);
        }
        Ok(Self { objects, index })
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Exact, case-sensitive vocabulary membership.
pub fn validate_vocabulary_membership(name: &str, vocab: &Vocabulary) -> bool {
    vocab.contains(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframe {
    pub index: usize,
    pub image_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub video_id: String,
    pub frames: Vec<Keyframe>,
}

impl Segment {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// Reference presence labels for every vocabulary object in one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub segment_id: String,
    pub labels: BTreeMap<String, Vec<bool>>,
}

impl GroundTruth {
    pub fn row(&self, object: &str) -> Option<&[bool]> {
        self.labels.get(object).map(Vec::as_slice)
    }

    /// Label of `object` at `frame`; names outside the labels read as absent.
    pub fn present(&self, object: &str, frame: usize) -> bool {
        self.labels
            .get(object)
            .and_then(|row| row.get(frame).copied())
            .unwrap_or(false)
    }

    pub fn frame_count(&self) -> usize {
        self.labels.values().next().map_or(0, Vec::len)
    }
}

/// An object placed on the heatmap, possibly as a spy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SelectedObject {
    pub name: String,
    pub is_spy: bool,
}

impl SelectedObject {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            is_spy: false,
        }
    }

    pub fn spy(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            is_spy: true,
        }
    }

    /// Parses evaluator input: a leading `*` marks a spy, the remainder is
    /// trimmed.
    pub fn parse(raw: &str) -> Self {
        let raw = raw.trim();
        match raw.strip_prefix('*') {
            Some(rest) => Self::spy(rest.trim()),
            None => Self::new(raw),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    GroundTruth,
    Random { seed: u64 },
    Cached { cache_ref: String },
    SyntheticNoisy { flip_probability: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub model_id: String,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl ModelDescriptor {
    pub fn new(model_id: impl Into<String>, kind: ModelKind) -> Self {
        Self {
            model_id: model_id.into(),
            kind,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self.kind, ModelKind::Random { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub task_id: String,
    pub name: String,
}

impl TaskDescriptor {
    pub fn multi_object_recognition() -> Self {
        Self {
            task_id: "multi-object-recognition".into(),
            name: "Multi-object recognition".into(),
        }
    }

    pub fn builtin() -> Vec<Self> {
        vec![Self::multi_object_recognition()]
    }
}

/// A cross-validated dataset. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dataset_id: String,
    pub vocabulary: Vocabulary,
    pub segments: Vec<Segment>,
    pub ground_truth: BTreeMap<String, GroundTruth>,
}

impl Dataset {
    pub fn segment(&self, segment_id: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.segment_id == segment_id)
    }

    pub fn ground_truth(&self, segment_id: &str) -> Option<&GroundTruth> {
        self.ground_truth.get(segment_id)
    }

    pub fn total_cells(&self) -> usize {
        self.segments.iter().map(Segment::frame_count).sum::<usize>() * self.vocabulary.len()
    }

    pub fn to_manifest(&self) -> Manifest {
        Manifest {
            dataset_id: self.dataset_id.clone(),
            vocabulary: self.vocabulary.objects().to_vec(),
            segments: self
                .segments
                .iter()
                .map(|s| ManifestSegment {
                    segment_id: s.segment_id.clone(),
                    video_id: s.video_id.clone(),
                    frames: s.frames.clone(),
                    ground_truth: self.ground_truth[&s.segment_id].labels.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_manifest()).expect("manifest serializes")
    }
}

/// Wire form of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_id: String,
    pub vocabulary: Vec<String>,
    pub segments: Vec<ManifestSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSegment {
    pub segment_id: String,
    pub video_id: String,
    pub frames: Vec<Keyframe>,
    pub ground_truth: BTreeMap<String, Vec<bool>>,
}

/// Parses and cross-validates a dataset manifest.
pub fn load_dataset(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let manifest: Manifest = serde_json::from_slice(bytes).map_err(|e| DatasetError::Json(e.to_string()))?;
    Dataset::try_from(manifest)
}

impl TryFrom<Manifest> for Dataset {
    type Error = DatasetError;

    fn try_from(manifest: Manifest) -> Result<Self, DatasetError> {
        let vocabulary = Vocabulary::new(&manifest.vocabulary)?;
        let mut segments = Vec::with_capacity(manifest.segments.len());
        let mut ground_truth = BTreeMap::new();

        for (si, seg) in manifest.segments.into_iter().enumerate() {
            let spath = format!("segments[{si}]");
            if ground_truth.contains_key(&seg.segment_id) {
                return Err(DatasetError::DuplicateSegment {
                    path: format!("{spath}.segment_id"),
                    id: seg.segment_id,
                });
            }
            if seg.frames.is_empty() {
                return Err(DatasetError::NoFrames {
                    path: format!("{spath}.frames"),
                });
            }
            for (fi, frame) in seg.frames.iter().enumerate() {
                if frame.index != fi {
                    return Err(DatasetError::FrameIndex {
                        path: format!("{spath}.frames[{fi}].index"),
                        expected: fi,
                        found: frame.index,
                    });
                }
            }
            let n_frames = seg.frames.len();
            let mut labels = BTreeMap::new();
            for (raw_name, row) in seg.ground_truth {
                let name = raw_name.trim().to_string();
                let path = format!("{spath}.ground_truth.{name}");
                if !vocabulary.contains(&name) {
                    return Err(DatasetError::UnknownObject { path, name });
                }
                if row.len() != n_frames {
                    return Err(DatasetError::LabelLength {
                        path,
                        expected: n_frames,
                        found: row.len(),
                    });
                }
                if labels.insert(name.clone(), row).is_some() {
                    return Err(DatasetError::DuplicateObject { path, name });
                }
            }
            if let Some(missing) = vocabulary.objects().iter().find(|o| !labels.contains_key(*o)) {
                return Err(DatasetError::MissingLabels {
                    path: format!("{spath}.ground_truth"),
                    name: missing.clone(),
                });
            }
            ground_truth.insert(
                seg.segment_id.clone(),
                GroundTruth {
                    segment_id: seg.segment_id.clone(),
                    labels,
                },
            );
            segments.push(Segment {
                segment_id: seg.segment_id,
                video_id: seg.video_id,
                frames: seg.frames,
            });
        }

        Ok(Dataset {
            dataset_id: manifest.dataset_id,
            vocabulary,
            segments,
            ground_truth,
        })
    }
}
