use std::fmt::Write as _;

use ikiwisi_core::metrics::micro_f1;
use ikiwisi_core::patterns::{detect_patterns, PatternReport};
use ikiwisi_core::session::MAX_FRAMES;
use ikiwisi_core::{predict, ConfusionSummary, ModelDescriptor, ModelKind, SelectedObject};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataSet;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("segment {0:?} exists in several datasets; pass --dataset")]
    AmbiguousSegment(String),
    #[error("bad frame list {0:?}")]
    FrameSyntax(String),
    #[error("frame {frame} out of range for {frames} frames")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error("object {0:?} not in vocabulary (prefix with '*' for a spy)")]
    UnknownObject(String),
    #[error("object {0:?} listed twice")]
    DuplicateObject(String),
    #[error("no objects given")]
    NoObjects,
    #[error("{0}")]
    Model(String),
}

/// Parses `"0-3,7,9-10"` into sorted unique frame indices.
pub fn parse_frames(spec: &str) -> Result<Vec<usize>, EvalError> {
    let bad = || EvalError::FrameSyntax(spec.to_string());
    let mut out = std::collections::BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalRequest {
    pub model_id: String,
    pub segment_id: String,
    #[serde(default)]
    pub dataset_id: Option<String>,
    /// Raw names; a leading `*` marks a spy.
    pub objects: Vec<String>,
    /// Defaults to the first 16 frames.
    #[serde(default)]
    pub frames: Option<Vec<usize>>,
    /// Replaces the seed of random and synthetic-noisy models.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub model_id: String,
    pub segment_id: String,
    pub objects: Vec<SelectedObject>,
    pub frames: Vec<usize>,
    pub summary: ConfusionSummary,
    pub patterns: PatternReport<f64>,
    pub missing_spy_rows: Vec<String>,
}

fn reseed(model: &ModelDescriptor, seed: Option<u64>) -> ModelDescriptor {
    let Some(seed) = seed else {
        return model.clone();
    };
    let kind = match &model.kind {
        ModelKind::Random { .. } => ModelKind::Random { seed },
        ModelKind::SyntheticNoisy { flip_probability, .. } => ModelKind::SyntheticNoisy {
            flip_probability: *flip_probability,
            seed,
        },
        other => other.clone(),
    };
    ModelDescriptor::new(model.model_id.clone(), kind)
}

/// Metrics of one model on one segment for a selection, the same numbers a
/// session over that selection records.
pub fn evaluate(data: &DataSet, req: &EvalRequest) -> Result<EvalReport, EvalError> {
    let model = data
        .model(&req.model_id)
        .ok_or_else(|| EvalError::UnknownModel(req.model_id.clone()))?;
    let model = reseed(model, req.seed);
    let ds = match &req.dataset_id {
        Some(d) => data
            .datasets
            .get(d)
            .ok_or_else(|| EvalError::UnknownDataset(d.clone()))?,
        None => match data.datasets_with_segment(&req.segment_id).as_slice() {
            [] => return Err(EvalError::UnknownSegment(req.segment_id.clone())),
            [one] => *one,
            _ => return Err(EvalError::AmbiguousSegment(req.segment_id.clone())),
        },
    };
    let segment = ds
        .segment(&req.segment_id)
        .ok_or_else(|| EvalError::UnknownSegment(req.segment_id.clone()))?;
    let gt = ds.ground_truth(&req.segment_id).expect("validated dataset");

    if req.objects.is_empty() {
        return Err(EvalError::NoObjects);
    }
    let mut objects: Vec<SelectedObject> = Vec::new();
    for raw in &req.objects {
        let o = SelectedObject::parse(raw);
        if !o.is_spy && !ds.vocabulary.contains(&o.name) {
            return Err(EvalError::UnknownObject(o.name));
        }
        if objects.iter().any(|x| x.name == o.name) {
            return Err(EvalError::DuplicateObject(o.name));
        }
        objects.push(o);
    }
    // display order: spies last
    objects.sort_by_key(|o| o.is_spy);

    let n_frames = segment.frame_count();
    let frames = match &req.frames {
        Some(f) => f.clone(),
        None => (0..n_frames.min(MAX_FRAMES)).collect(),
    };
    if let Some(&bad) = frames.iter().find(|&&f| f >= n_frames) {
        return Err(EvalError::FrameOutOfRange {
            frame: bad,
            frames: n_frames,
        });
    }

    let grid = predict(&model, segment, &objects, gt, data.caches_for(&ds.dataset_id))
        .map_err(|e| EvalError::Model(e.to_string()))?;
    let summary = micro_f1::<f64>(&grid, gt, &objects, &frames).map_err(|e| EvalError::Model(e.to_string()))?;
    let names: Vec<String> = objects.iter().map(|o| o.name.clone()).collect();
    let rows: Vec<Vec<bool>> = objects
        .iter()
        .map(|o| frames.iter().map(|&f| grid.cells[&o.name][f]).collect())
        .collect();
    let patterns = detect_patterns(&names, &frames, &rows).map_err(|e| EvalError::Model(e.to_string()))?;

    Ok(EvalReport {
        dataset_id: ds.dataset_id.clone(),
        model_id: model.model_id.clone(),
        segment_id: segment.segment_id.clone(),
        objects,
        frames,
        summary,
        patterns,
        missing_spy_rows: grid.missing_spy_rows.into_iter().collect(),
    })
}

/// Aligned plain-text rendering of a report.
pub fn render_text(r: &EvalReport) -> String {
    let mut out = String::new();
    let s = &r.summary;
    let c = &s.counts;
    let objects: Vec<String> = r
        .objects
        .iter()
        .map(|o| {
            if o.is_spy {
                format!("*{}", o.name)
            } else {
                o.name.clone()
            }
        })
        .collect();
    let _ = writeln!(out, "model      {}", r.model_id);
    let _ = writeln!(out, "segment    {} ({})", r.segment_id, r.dataset_id);
    let _ = writeln!(out, "objects    {}", objects.join(", "));
    let _ = writeln!(out, "frames     {:?}", r.frames);
    let _ = writeln!(out);
    let _ = writeln!(out, "tp         {:>8}", c.tp);
    let _ = writeln!(out, "tn         {:>8}", c.tn);
    let _ = writeln!(out, "fp         {:>8}", c.fp);
    let _ = writeln!(out, "fn         {:>8}", c.fn_);
    let _ = writeln!(out, "precision  {:.6}", s.precision);
    let _ = writeln!(out, "recall     {:.6}", s.recall);
    let _ = writeln!(out, "f1         {:.6}", s.f1);
    let _ = writeln!(out);
    let p = &r.patterns;
    let _ = writeln!(out, "checkered  {:.6}", p.checkered_score);
    for u in &p.uni_color_rows {
        let _ = writeln!(out, "uni-color  {} ({})", u.object, serde_plain(&u.color));
    }
    for o in &p.single_outliers {
        let _ = writeln!(out, "outlier    {} @ {}", o.object, o.frame);
    }
    for i in &p.outlier_islands {
        let _ = writeln!(
            out,
            "island     {} @ {}+{} ({})",
            i.object,
            i.start_frame,
            i.length,
            serde_plain(&i.color)
        );
    }
    for i in &p.uncategorized_runs {
        let _ = writeln!(out, "edge run   {} @ {}+{}", i.object, i.start_frame, i.length);
    }
    for m in &r.missing_spy_rows {
        let _ = writeln!(out, "warning    no prediction row for spy {m:?}; shown as absent");
    }
    out
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
