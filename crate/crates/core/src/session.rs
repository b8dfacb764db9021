//! Evaluator session state, folded from an append-only event log.
//!
//! Every accepted mutation appends exactly one [`SessionEvent`]; rejected
//! commands leave both state and log untouched. Replaying a log through
//! [`Session::replay`] rebuilds the identical state.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{GroundTruth, SelectedObject, Vocabulary};
use crate::metrics::{micro_f1, MetricsError};
use crate::patterns::{detect_patterns, CellColor, PatternError, PatternReport};
use crate::providers::PredictionGrid;
use crate::scalar::Scalar;
use crate::stats::RatingRecord;

pub const MAX_OBJECTS: usize = 16;
pub const MAX_FRAMES: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("session frozen: already recorded")]
    Frozen,
    #[error("cap exceeded: at most {cap} {what}")]
    CapExceeded { what: &'static str, cap: usize },
    #[error("object {0:?} already selected")]
    Duplicate(String),
    #[error("empty object name")]
    EmptyName,
    #[error("object {0:?} not in vocabulary (prefix with '*' to add a spy)")]
    NotInVocabulary(String),
    #[error("object {0:?} is not selected")]
    NotSelected(String),
    #[error("frame {0} is not included")]
    FrameExcluded(usize),
    #[error("frame {frame} out of range for {frames} frames")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error("cannot exclude the last included frame")]
    NoFramesLeft,
    #[error("rating {0} invalid: must be multiple of 10 in 0..=100")]
    InvalidRating(u8),
    #[error("no objects selected")]
    EmptySelection,
    #[error("f1 {0} outside [0, 1]")]
    InvalidF1(f64),
    #[error("event seq {found} where {expected} was expected")]
    Sequence { expected: u64, found: u64 },
    #[error("event log must start with a create event")]
    MissingCreate,
    #[error("create event after session start")]
    DuplicateCreate,
    #[error("event belongs to session {found:?}, not {expected:?}")]
    ForeignEvent { expected: String, found: String },
    #[error("prediction grid lacks a row for {0:?}")]
    GridCoverage(String),
    #[error("prediction grid is for {found:?}, session is on {expected:?}")]
    GridMismatch { expected: String, found: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorMode {
    #[default]
    Default,
    Colorblind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    #[default]
    Active,
    Recorded,
}

/// What happened, serialized as `"kind"` plus `"payload"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Create {
        rater_id: String,
        dataset_id: String,
        model_id: String,
        segment_id: String,
        frame_count: usize,
    },
    AddObject {
        raw_name: String,
    },
    RemoveObject {
        name: String,
    },
    Toggle {
        object: String,
        frame: usize,
    },
    FrameIncluded {
        frame: usize,
        included: bool,
    },
    Rating {
        rating: u8,
    },
    ColorMode {
        mode: ColorMode,
    },
    Record {
        rating: u8,
        #[serde(default)]
        comment: Option<String>,
        f1_star: f64,
    },
    Hover {
        #[serde(default)]
        object: Option<String>,
        frame: usize,
    },
    Zoom {
        frame: usize,
    },
}

impl EventKind {
    /// Events a client may submit directly; create and record go through
    /// their own commands.
    pub fn is_client_event(&self) -> bool {
        !matches!(self, Self::Create { .. } | Self::Record { .. })
    }
}

/// One line of the session event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub ts: DateTime<Utc>,
    pub session_id: String,
    pub seq: u64,
    #[serde(flatten)]
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSession {
    pub session_id: String,
    pub rater_id: String,
    pub dataset_id: String,
    pub model_id: String,
    pub segment_id: String,
    pub frame_count: usize,
    /// Display order: regular objects first, spies last.
    pub selected_objects: Vec<SelectedObject>,
    pub included_frames: BTreeSet<usize>,
    pub toggles: BTreeSet<(String, usize)>,
    pub rating: Option<u8>,
    pub comment: Option<String>,
    pub color_mode: ColorMode,
    pub status: SessionStatus,
    pub created_at: DateTime<Utc>,
    pub record: Option<RatingRecord>,
}

pub fn validate_rating(rating: u8) -> Result<(), SessionError> {
    if rating <= 100 && rating.is_multiple_of(10) {
        Ok(())
    } else {
        Err(SessionError::InvalidRating(rating))
    }
}

impl EvalSession {
    fn from_create(session_id: &str, event: &EventKind, ts: DateTime<Utc>) -> Result<Self, SessionError> {
        let EventKind::Create {
            rater_id,
            dataset_id,
            model_id,
            segment_id,
            frame_count,
        } = event
        else {
            return Err(SessionError::MissingCreate);
        };
        if *frame_count == 0 {
            return Err(SessionError::NoFramesLeft);
        }
        Ok(Self {
            session_id: session_id.to_string(),
            rater_id: rater_id.clone(),
            dataset_id: dataset_id.clone(),
            model_id: model_id.clone(),
            segment_id: segment_id.clone(),
            frame_count: *frame_count,
            selected_objects: Vec::new(),
            included_frames: (0..(*frame_count).min(MAX_FRAMES)).collect(),
            toggles: BTreeSet::new(),
            rating: None,
            comment: None,
            color_mode: ColorMode::Default,
            status: SessionStatus::Active,
            created_at: ts,
            record: None,
        })
    }

    pub fn is_selected(&self, name: &str) -> bool {
        self.selected_objects.iter().any(|o| o.name == name)
    }

    pub fn included_frames_vec(&self) -> Vec<usize> {
        self.included_frames.iter().copied().collect()
    }

    /// Toggle counts for every included frame, in frame order.
    pub fn modification_summary(&self) -> Vec<FrameModifications> {
        self.included_frames
            .iter()
            .map(|&frame| FrameModifications {
                frame,
                toggles: self.toggles.iter().filter(|(_, f)| *f == frame).count(),
            })
            .collect()
    }

    fn check_frame(&self, frame: usize) -> Result<(), SessionError> {
        if frame >= self.frame_count {
            Err(SessionError::FrameOutOfRange {
                frame,
                frames: self.frame_count,
            })
        } else {
            Ok(())
        }
    }

    /// Validates `event` against the current state and applies it.
    pub fn apply(&mut self, event: &EventKind, ts: DateTime<Utc>, vocab: &Vocabulary) -> Result<(), SessionError> {
        if self.status == SessionStatus::Recorded {
            return Err(SessionError::Frozen);
        }
        match event {
            EventKind::Create { .. } => return Err(SessionError::DuplicateCreate),
            EventKind::AddObject { raw_name } => {
                let obj = SelectedObject::parse(raw_name);
                if obj.name.is_empty() {
                    return Err(SessionError::EmptyName);
                }
                if self.is_selected(&obj.name) {
                    return Err(SessionError::Duplicate(obj.name));
                }
                if !obj.is_spy && !vocab.contains(&obj.name) {
                    return Err(SessionError::NotInVocabulary(obj.name));
                }
                if self.selected_objects.len() >= MAX_OBJECTS {
                    return Err(SessionError::CapExceeded {
                        what: "objects",
                        cap: MAX_OBJECTS,
                    });
                }
                let at = if obj.is_spy {
                    self.selected_objects.len()
                } else {
                    self.selected_objects
                        .iter()
                        .position(|o| o.is_spy)
                        .unwrap_or(self.selected_objects.len())
                };
                self.selected_objects.insert(at, obj);
            }
            EventKind::RemoveObject { name } => {
                let pos = self
                    .selected_objects
                    .iter()
                    .position(|o| &o.name == name)
                    .ok_or_else(|| SessionError::NotSelected(name.clone()))?;
                self.selected_objects.remove(pos);
                self.toggles.retain(|(o, _)| o != name);
            }
            EventKind::Toggle { object, frame } => {
                if !self.is_selected(object) {
                    return Err(SessionError::NotSelected(object.clone()));
                }
                self.check_frame(*frame)?;
                if !self.included_frames.contains(frame) {
                    return Err(SessionError::FrameExcluded(*frame));
                }
                let key = (object.clone(), *frame);
                if !self.toggles.remove(&key) {
                    self.toggles.insert(key);
                }
            }
            EventKind::FrameIncluded { frame, included } => {
                self.check_frame(*frame)?;
                if *included {
                    if !self.included_frames.contains(frame) && self.included_frames.len() >= MAX_FRAMES {
                        return Err(SessionError::CapExceeded {
                            what: "frames",
                            cap: MAX_FRAMES,
                        });
                    }
                    self.included_frames.insert(*frame);
                } else {
                    if self.included_frames.len() == 1 && self.included_frames.contains(frame) {
                        return Err(SessionError::NoFramesLeft);
                    }
                    self.included_frames.remove(frame);
                    self.toggles.retain(|(_, f)| f != frame);
                }
            }
            EventKind::Rating { rating } => {
                validate_rating(*rating)?;
                self.rating = Some(*rating);
            }
            EventKind::ColorMode { mode } => self.color_mode = *mode,
            EventKind::Record {
                rating,
                comment,
                f1_star,
            } => {
                validate_rating(*rating)?;
                if self.selected_objects.is_empty() {
                    return Err(SessionError::EmptySelection);
                }
                if !(0.0..=1.0).contains(f1_star) {
                    return Err(SessionError::InvalidF1(*f1_star));
                }
                self.rating = Some(*rating);
                self.comment = comment.clone();
                self.status = SessionStatus::Recorded;
                let elapsed = (ts - self.created_at).num_milliseconds() as f64 / 1000.0;
                self.record = Some(RatingRecord {
                    rater_id: self.rater_id.clone(),
                    model_id: self.model_id.clone(),
                    segment_id: self.segment_id.clone(),
                    raw_rating: *rating,
                    f1_star: *f1_star,
                    completion_seconds: Some(elapsed.max(0.0)),
                    session_id: Some(self.session_id.clone()),
                    recorded_at: Some(ts),
                });
            }
            EventKind::Hover { object, frame } => {
                if let Some(o) = object {
                    if !self.is_selected(o) {
                        return Err(SessionError::NotSelected(o.clone()));
                    }
                }
                self.check_frame(*frame)?;
            }
            EventKind::Zoom { frame } => self.check_frame(*frame)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameModifications {
    pub frame: usize,
    pub toggles: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayCell {
    pub frame: usize,
    pub predicted: bool,
    pub shown_color: CellColor,
    pub is_toggled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayRow {
    pub object: String,
    pub is_spy: bool,
    pub cells: Vec<DisplayCell>,
}

/// The heatmap as shown: prediction XOR toggle per cell. The color mode is
/// carried as metadata and never changes cell values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayGrid {
    pub session_id: String,
    pub model_id: String,
    pub segment_id: String,
    pub color_mode: ColorMode,
    pub frames: Vec<usize>,
    pub rows: Vec<DisplayRow>,
}

impl DisplayGrid {
    pub fn shown_matrix(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|r| r.cells.iter().map(|c| c.shown_color == CellColor::Exists).collect())
            .collect()
    }

    pub fn objects(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.object.clone()).collect()
    }

    pub fn patterns<T: Scalar>(&self) -> Result<PatternReport<T>, PatternError> {
        detect_patterns(&self.objects(), &self.frames, &self.shown_matrix())
    }
}

pub fn render_display_grid(session: &EvalSession, grid: &PredictionGrid) -> Result<DisplayGrid, SessionError> {
    if grid.segment_id != session.segment_id {
        return Err(SessionError::GridMismatch {
            expected: session.segment_id.clone(),
            found: grid.segment_id.clone(),
        });
    }
    let frames = session.included_frames_vec();
    let rows = session
        .selected_objects
        .iter()
        .map(|obj| {
            let row = grid
                .row(&obj.name)
                .filter(|r| r.len() == session.frame_count)
                .ok_or_else(|| SessionError::GridCoverage(obj.name.clone()))?;
            let cells = frames
                .iter()
                .map(|&f| {
                    let is_toggled = session.toggles.contains(&(obj.name.clone(), f));
                    DisplayCell {
                        frame: f,
                        predicted: row[f],
                        shown_color: CellColor::of(row[f] ^ is_toggled),
                        is_toggled,
                    }
                })
                .collect();
            Ok(DisplayRow {
                object: obj.name.clone(),
                is_spy: obj.is_spy,
                cells,
            })
        })
        .collect::<Result<_, SessionError>>()?;
    Ok(DisplayGrid {
        session_id: session.session_id.clone(),
        model_id: session.model_id.clone(),
        segment_id: session.segment_id.clone(),
        color_mode: session.color_mode,
        frames,
        rows,
    })
}

/// Session state together with the log that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    state: EvalSession,
    events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreateParams {
    pub rater_id: String,
    pub dataset_id: String,
    pub model_id: String,
    pub segment_id: String,
    pub frame_count: usize,
}

impl Session {
    pub fn create(session_id: impl Into<String>, params: CreateParams) -> Result<Self, SessionError> {
        Self::create_at(session_id, params, Utc::now())
    }

    pub fn create_at(
        session_id: impl Into<String>,
        params: CreateParams,
        ts: DateTime<Utc>,
    ) -> Result<Self, SessionError> {
        let session_id = session_id.into();
        let event = EventKind::Create {
            rater_id: params.rater_id,
            dataset_id: params.dataset_id,
            model_id: params.model_id,
            segment_id: params.segment_id,
            frame_count: params.frame_count,
        };
        let state = EvalSession::from_create(&session_id, &event, ts)?;
        Ok(Self {
            state,
            events: vec![SessionEvent {
                ts,
                session_id,
                seq: 0,
                event,
            }],
        })
    }

    pub fn state(&self) -> &EvalSession {
        &self.state
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn id(&self) -> &str {
        &self.state.session_id
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64
    }

    /// Applies one event and appends it to the log. Returns the logged event.
    pub fn submit_at(
        &mut self,
        event: EventKind,
        ts: DateTime<Utc>,
        vocab: &Vocabulary,
    ) -> Result<&SessionEvent, SessionError> {
        self.state.apply(&event, ts, vocab)?;
        self.events.push(SessionEvent {
            ts,
            session_id: self.state.session_id.clone(),
            seq: self.next_seq(),
            event,
        });
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn submit(&mut self, event: EventKind, vocab: &Vocabulary) -> Result<&SessionEvent, SessionError> {
        self.submit_at(event, Utc::now(), vocab)
    }

    /// Validates `event` without applying it.
    pub fn check(&self, event: &EventKind, ts: DateTime<Utc>, vocab: &Vocabulary) -> Result<(), SessionError> {
        self.state.clone().apply(event, ts, vocab)
    }

    pub fn add_object(&mut self, raw_name: &str, vocab: &Vocabulary) -> Result<(), SessionError> {
        self.submit(
            EventKind::AddObject {
                raw_name: raw_name.to_string(),
            },
            vocab,
        )
        .map(drop)
    }

    pub fn remove_object(&mut self, name: &str, vocab: &Vocabulary) -> Result<(), SessionError> {
        self.submit(EventKind::RemoveObject { name: name.to_string() }, vocab)
            .map(drop)
    }

    pub fn toggle_cell(&mut self, object: &str, frame: usize, vocab: &Vocabulary) -> Result<(), SessionError> {
        self.submit(
            EventKind::Toggle {
                object: object.to_string(),
                frame,
            },
            vocab,
        )
        .map(drop)
    }

    pub fn set_frame_included(&mut self, frame: usize, included: bool, vocab: &Vocabulary) -> Result<(), SessionError> {
        self.submit(EventKind::FrameIncluded { frame, included }, vocab)
            .map(drop)
    }

    /// The record event for this session, with F1 over the selected objects
    /// and included frames of the raw predictions (toggles excluded).
    pub fn record_event(
        &self,
        rating: u8,
        comment: Option<String>,
        grid: &PredictionGrid,
        gt: &GroundTruth,
    ) -> Result<EventKind, SessionError> {
        if self.state.status == SessionStatus::Recorded {
            return Err(SessionError::Frozen);
        }
        validate_rating(rating)?;
        if self.state.selected_objects.is_empty() {
            return Err(SessionError::EmptySelection);
        }
        let summary = micro_f1::<f64>(
            grid,
            gt,
            &self.state.selected_objects,
            &self.state.included_frames_vec(),
        )?;
        Ok(EventKind::Record {
            rating,
            comment,
            f1_star: summary.f1,
        })
    }

    /// Records the rating, freezes the session and returns the record.
    pub fn record_and_reset(
        &mut self,
        rating: u8,
        comment: Option<String>,
        grid: &PredictionGrid,
        gt: &GroundTruth,
        vocab: &Vocabulary,
    ) -> Result<RatingRecord, SessionError> {
        self.record_and_reset_at(rating, comment, grid, gt, vocab, Utc::now())
    }

    pub fn record_and_reset_at(
        &mut self,
        rating: u8,
        comment: Option<String>,
        grid: &PredictionGrid,
        gt: &GroundTruth,
        vocab: &Vocabulary,
        ts: DateTime<Utc>,
    ) -> Result<RatingRecord, SessionError> {
        let event = self.record_event(rating, comment, grid, gt)?;
        self.submit_at(event, ts, vocab)?;
        Ok(self.state.record.clone().expect("recorded"))
    }

    pub fn render(&self, grid: &PredictionGrid) -> Result<DisplayGrid, SessionError> {
        render_display_grid(&self.state, grid)
    }

    /// Rebuilds a session by folding its logged events.
    pub fn replay<'a, I>(events: I, vocab: &Vocabulary) -> Result<Self, SessionError>
    where
        I: IntoIterator<Item = &'a SessionEvent>,
    {
        let mut iter = events.into_iter();
        let first = iter.next().ok_or(SessionError::MissingCreate)?;
        if first.seq != 0 {
            return Err(SessionError::Sequence {
                expected: 0,
                found: first.seq,
            });
        }
        let state = EvalSession::from_create(&first.session_id, &first.event, first.ts)?;
        let mut session = Self {
            state,
            events: vec![first.clone()],
        };
        for ev in iter {
            if ev.session_id != session.state.session_id {
                return Err(SessionError::ForeignEvent {
                    expected: session.state.session_id.clone(),
                    found: ev.session_id.clone(),
                });
            }
            if ev.seq != session.next_seq() {
                return Err(SessionError::Sequence {
                    expected: session.next_seq(),
                    found: ev.seq,
                });
            }
            session.state.apply(&ev.event, ev.ts, vocab)?;
            session.events.push(ev.clone());
        }
        Ok(session)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn vocab() -> Vocabulary {
        Vocabulary::new((0..20).map(|i| format!("obj{i}")).chain(["Car".to_string()])).unwrap()
    }

    fn session(frames: usize) -> Session {
        Session::create(
            "s1",
            CreateParams {
                rater_id: "r1".into(),
                dataset_id: "d".into(),
                model_id: "gt".into(),
                segment_id: "seg".into(),
                frame_count: frames,
            },
        )
        .unwrap()
    }

    #[test]
    fn create_includes_first_sixteen_frames() {
        assert_eq!(session(5).state().included_frames, (0..5).collect());
        assert_eq!(session(20).state().included_frames, (0..16).collect());
        assert_eq!(session(5).events()[0].seq, 0);
    }

    #[test]
    fn add_objects_spies_last_and_cap() {
        let v = vocab();
        let mut s = session(4);
        s.add_object("*Chair", &v).unwrap();
        s.add_object("Car", &v).unwrap();
        let names: Vec<_> = s
            .state()
            .selected_objects
            .iter()
            .map(|o| (o.name.as_str(), o.is_spy))
            .collect();
        assert_eq!(names, vec![("Car", false), ("Chair", true)]);
        assert_eq!(s.add_object("Car", &v), Err(SessionError::Duplicate("Car".into())));
        assert_eq!(
            s.add_object("car", &v),
            Err(SessionError::NotInVocabulary("car".into()))
        );
        for i in 0..14 {
            s.add_object(&format!("obj{i}"), &v).unwrap();
        }
        assert_eq!(s.state().selected_objects.len(), 16);
        assert!(matches!(
            s.add_object("obj15", &v),
            Err(SessionError::CapExceeded { cap: 16, .. })
        ));
        // rejected commands are not logged
        assert_eq!(s.events().len(), 17);
    }

    #[test]
    fn toggle_involution_and_summary() {
        let v = vocab();
        let mut s = session(5);
        s.add_object("Car", &v).unwrap();
        s.toggle_cell("Car", 3, &v).unwrap();
        let summary = s.state().modification_summary();
        assert_eq!(summary.iter().find(|m| m.frame == 3).unwrap().toggles, 1);
        assert_eq!(
            summary.iter().map(|m| m.toggles).sum::<usize>(),
            s.state().toggles.len()
        );
        s.toggle_cell("Car", 3, &v).unwrap();
        assert!(s.state().toggles.is_empty());
        assert_eq!(
            s.toggle_cell("obj1", 0, &v),
            Err(SessionError::NotSelected("obj1".into()))
        );
    }

    #[test]
    fn frame_inclusion_rules() {
        let v = vocab();
        let mut s = session(3);
        s.add_object("Car", &v).unwrap();
        s.toggle_cell("Car", 2, &v).unwrap();
        s.set_frame_included(2, false, &v).unwrap();
        assert_eq!(s.state().included_frames, BTreeSet::from([0, 1]));
        assert!(s.state().toggles.is_empty());
        assert_eq!(s.toggle_cell("Car", 2, &v), Err(SessionError::FrameExcluded(2)));
        s.set_frame_included(1, false, &v).unwrap();
        assert_eq!(s.set_frame_included(0, false, &v), Err(SessionError::NoFramesLeft));

        let mut big = session(20);
        assert!(matches!(
            big.set_frame_included(17, true, &v),
            Err(SessionError::CapExceeded { cap: 16, .. })
        ));
        big.set_frame_included(0, false, &v).unwrap();
        big.set_frame_included(17, true, &v).unwrap();
        assert!(big.state().included_frames.contains(&17));
    }

    #[test]
    fn removing_object_drops_its_toggles() {
        let v = vocab();
        let mut s = session(3);
        s.add_object("Car", &v).unwrap();
        s.toggle_cell("Car", 0, &v).unwrap();
        s.remove_object("Car", &v).unwrap();
        s.add_object("Car", &v).unwrap();
        assert!(s.state().toggles.is_empty());
    }

    fn grid_and_truth() -> (PredictionGrid, GroundTruth) {
        let rows = BTreeMap::from([("Car".to_string(), vec![true, false, true])]);
        (
            PredictionGrid {
                model_id: "gt".into(),
                segment_id: "seg".into(),
                cells: rows
                    .clone()
                    .into_iter()
                    .chain([("Chair".to_string(), vec![false; 3])])
                    .collect(),
                missing_spy_rows: Default::default(),
            },
            GroundTruth {
                segment_id: "seg".into(),
                labels: rows,
            },
        )
    }

    #[test]
    fn record_freezes_and_validates() {
        let v = vocab();
        let (grid, gt) = grid_and_truth();
        let mut s = session(3);
        assert_eq!(
            s.record_and_reset(70, None, &grid, &gt, &v),
            Err(SessionError::EmptySelection)
        );
        s.add_object("Car", &v).unwrap();
        s.add_object("*Chair", &v).unwrap();
        let err = s.record_and_reset(55, None, &grid, &gt, &v).unwrap_err();
        assert!(err.to_string().contains("must be multiple of 10"));
        s.toggle_cell("Car", 0, &v).unwrap();
        let rec = s.record_and_reset(100, Some("fine".into()), &grid, &gt, &v).unwrap();
        assert_eq!(rec.f1_star, 1.0);
        assert_eq!(rec.raw_rating, 100);
        assert_eq!(s.state().status, SessionStatus::Recorded);
        let err = s.add_object("obj1", &v).unwrap_err();
        assert_eq!(err.to_string(), "session frozen: already recorded");
    }

    #[test]
    fn display_grid_xor_and_color_mode() {
        let v = vocab();
        let (grid, _) = grid_and_truth();
        let mut s = session(3);
        s.add_object("Car", &v).unwrap();
        let plain = s.render(&grid).unwrap();
        assert_eq!(plain.shown_matrix(), vec![vec![true, false, true]]);
        s.toggle_cell("Car", 0, &v).unwrap();
        let toggled = s.render(&grid).unwrap();
        assert_eq!(toggled.rows[0].cells[0].shown_color, CellColor::NotExists);
        assert!(toggled.rows[0].cells[0].is_toggled);
        s.submit(
            EventKind::ColorMode {
                mode: ColorMode::Colorblind,
            },
            &v,
        )
        .unwrap();
        let cb = s.render(&grid).unwrap();
        assert_eq!(cb.color_mode, ColorMode::Colorblind);
        assert_eq!(cb.rows, toggled.rows);

        s.add_object("obj3", &v).unwrap();
        assert_eq!(s.render(&grid), Err(SessionError::GridCoverage("obj3".into())));
    }

    #[test]
    fn event_wire_format() {
        let v = vocab();
        let mut s = session(3);
        s.add_object("*Snow", &v).unwrap();
        let line = serde_json::to_value(&s.events()[1]).unwrap();
        assert_eq!(line["kind"], "add_object");
        assert_eq!(line["payload"]["raw_name"], "*Snow");
        assert_eq!(line["seq"], 1);
        assert_eq!(line["session_id"], "s1");
        let back: SessionEvent = serde_json::from_value(line).unwrap();
        assert_eq!(back, s.events()[1]);
    }

    #[test]
    fn replay_rejects_gaps_and_foreign_events() {
        let v = vocab();
        let mut s = session(3);
        s.add_object("Car", &v).unwrap();
        s.submit(
            EventKind::Hover {
                object: Some("Car".into()),
                frame: 1,
            },
            &v,
        )
        .unwrap();
        let replayed = Session::replay(s.events(), &v).unwrap();
        assert_eq!(replayed, s);

        let mut gap = s.events().to_vec();
        gap.remove(1);
        assert!(matches!(
            Session::replay(&gap, &v),
            Err(SessionError::Sequence { expected: 1, found: 2 })
        ));
        assert_eq!(
            Session::replay(&s.events()[1..], &v).unwrap_err(),
            SessionError::Sequence { expected: 0, found: 1 }
        );
    }
}
