use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use chrono::Utc;
use ikiwisi_core::metrics::{f1_global, MetricsError};
use ikiwisi_core::patterns::PatternReport;
use ikiwisi_core::session::{CreateParams, DisplayGrid, EventKind, FrameModifications, SessionStatus};
use ikiwisi_core::stats::{analyze, AnalysisOptions, AnalysisReport};
use ikiwisi_core::{
    predict, Dataset, EvalSession, ModelDescriptor, PredictionGrid, ProviderError, RatingRecord, Session, SessionError,
    SessionEvent,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataSet;
use crate::store::{group_by_session, EventLog, StoreError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error("log replay failed for session {session}: {source}")]
    Replay {
        session: String,
        #[source]
        source: SessionError,
    },
    #[error("{0}")]
    Internal(String),
}

impl From<SessionError> for CatalogError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Frozen => Self::Conflict(e.to_string()),
            SessionError::Metrics(MetricsError::Provider(p)) => p.into(),
            other => Self::BadRequest(other.to_string()),
        }
    }
}

impl From<ProviderError> for CatalogError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::UnknownObject(_) | ProviderError::NoObjects => Self::BadRequest(e.to_string()),
            other => Self::Internal(other.to_string()),
        }
    }
}

impl From<MetricsError> for CatalogError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Provider(p) => p.into(),
            other => Self::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub segment_id: String,
    pub video_id: String,
    pub frame_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub vocabulary: Vec<String>,
    pub segments: Vec<SegmentSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    #[serde(default = "anonymous")]
    pub rater_id: String,
    /// May be omitted when the segment id is unique across datasets.
    #[serde(default)]
    pub dataset_id: Option<String>,
    pub model_id: String,
    pub segment_id: String,
}

fn anonymous() -> String {
    "anonymous".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordRequest {
    pub rating: u8,
    #[serde(default)]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session: EvalSession,
    pub modification_summary: Vec<FrameModifications>,
    pub event_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventAck {
    pub event: SessionEvent,
    pub session: EvalSession,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridView {
    pub display: DisplayGrid,
    pub patterns: PatternReport<f64>,
    pub modification_summary: Vec<FrameModifications>,
    /// Spy rows filled with "absent" because the model had no row for them.
    pub missing_spy_rows: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingsView {
    pub ratings: Vec<RatingRecord>,
    pub report: AnalysisReport<f64>,
}

/// Loaded data plus live sessions. Datasets and models never change after
/// startup; each session has its own lock.
pub struct Catalog {
    data: Arc<DataSet>,
    model_f1: BTreeMap<String, BTreeMap<String, f64>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log: Mutex<EventLog>,
    ratings: RwLock<Vec<RatingRecord>>,
}

impl Catalog {
    /// Loads the event log in `log_dir` and rebuilds every session from it.
    pub fn open(data: DataSet, log_dir: &Path) -> Result<Self, CatalogError> {
        let (log, events) = EventLog::open(log_dir)?;
        let mut sessions = HashMap::new();
        let mut recorded = Vec::new();
        for (id, events) in group_by_session(events) {
            let dataset_id = match &events[0].event {
                EventKind::Create { dataset_id, .. } => dataset_id.clone(),
                _ => {
                    return Err(CatalogError::Replay {
                        session: id,
                        source: SessionError::MissingCreate,
                    })
                }
            };
            let ds = data
                .datasets
                .get(&dataset_id)
                .ok_or_else(|| CatalogError::NotFound(format!("dataset {dataset_id:?} referenced by session {id}")))?;
            let session = Session::replay(&events, &ds.vocabulary).map_err(|source| CatalogError::Replay {
                session: id.clone(),
                source,
            })?;
            if let Some(r) = &session.state().record {
                recorded.push((events.last().map(|e| e.ts), r.clone()));
            }
            sessions.insert(id, Arc::new(Mutex::new(session)));
        }
        recorded.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.session_id.cmp(&b.1.session_id)));
        tracing::info!(
            sessions = sessions.len(),
            ratings = recorded.len(),
            "replayed event log"
        );

        let mut model_f1 = BTreeMap::new();
        for (dataset_id, ds) in &data.datasets {
            let caches = data.caches_for(dataset_id);
            let per_model = data
                .models
                .iter()
                .filter_map(|m| f1_global::<f64>(m, ds, caches).ok().map(|f| (m.model_id.clone(), f)))
                .collect();
            model_f1.insert(dataset_id.clone(), per_model);
        }

        Ok(Self {
            data: Arc::new(data),
            model_f1,
            sessions: RwLock::new(sessions),
            log: Mutex::new(log),
            ratings: RwLock::new(recorded.into_iter().map(|(_, r)| r).collect()),
        })
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn datasets(&self) -> Vec<DatasetSummary> {
        self.data
            .datasets
            .values()
            .map(|d| DatasetSummary {
                dataset_id: d.dataset_id.clone(),
                vocabulary: d.vocabulary.objects().to_vec(),
                segments: d
                    .segments
                    .iter()
                    .map(|s| SegmentSummary {
                        segment_id: s.segment_id.clone(),
                        video_id: s.video_id.clone(),
                        frame_count: s.frame_count(),
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn segment(&self, dataset_id: &str, segment_id: &str) -> Result<ikiwisi_core::Segment, CatalogError> {
        let ds = self.dataset(dataset_id)?;
        ds.segment(segment_id)
            .cloned()
            .ok_or_else(|| CatalogError::NotFound(format!("segment {segment_id:?}")))
    }

    pub fn models(&self) -> &[ModelDescriptor] {
        &self.data.models
    }

    fn dataset(&self, dataset_id: &str) -> Result<&Dataset, CatalogError> {
        self.data
            .datasets
            .get(dataset_id)
            .ok_or_else(|| CatalogError::NotFound(format!("dataset {dataset_id:?}")))
    }

    fn model(&self, model_id: &str) -> Result<&ModelDescriptor, CatalogError> {
        self.data
            .model(model_id)
            .ok_or_else(|| CatalogError::NotFound(format!("model {model_id:?}")))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, CatalogError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| CatalogError::NotFound(format!("session {id:?}")))
    }

    pub fn create_session(&self, req: CreateSessionRequest) -> Result<EvalSession, CatalogError> {
        self.model(&req.model_id)?;
        let ds = match &req.dataset_id {
            Some(d) => self.dataset(d)?,
            None => match self.data.datasets_with_segment(&req.segment_id).as_slice() {
                [] => return Err(CatalogError::NotFound(format!("segment {:?}", req.segment_id))),
                [one] => *one,
                _ => {
                    return Err(CatalogError::BadRequest(format!(
                        "segment {:?} exists in several datasets; pass dataset_id",
                        req.segment_id
                    )))
                }
            },
        };
        let segment = ds
            .segment(&req.segment_id)
            .ok_or_else(|| CatalogError::NotFound(format!("segment {:?}", req.segment_id)))?;
        let id = uuid::Uuid::new_v4().to_string();
        let session = Session::create_at(
            id.clone(),
            CreateParams {
                rater_id: req.rater_id,
                dataset_id: ds.dataset_id.clone(),
                model_id: req.model_id,
                segment_id: segment.segment_id.clone(),
                frame_count: segment.frame_count(),
            },
            Utc::now(),
        )?;
        self.log.lock().append(&session.events()[0])?;
        let state = session.state().clone();
        self.sessions.write().insert(id, Arc::new(Mutex::new(session)));
        Ok(state)
    }

    pub fn session_view(&self, id: &str) -> Result<SessionView, CatalogError> {
        let handle = self.session(id)?;
        let s = handle.lock();
        Ok(SessionView {
            session: s.state().clone(),
            modification_summary: s.state().modification_summary(),
            event_count: s.events().len(),
        })
    }

    pub fn session_events(&self, id: &str) -> Result<Vec<SessionEvent>, CatalogError> {
        Ok(self.session(id)?.lock().events().to_vec())
    }

    /// Validates, logs, then applies one client event.
    pub fn submit_event(&self, id: &str, event: EventKind) -> Result<EventAck, CatalogError> {
        if !event.is_client_event() {
            return Err(CatalogError::BadRequest(
                "create and record events have their own endpoints".into(),
            ));
        }
        let handle = self.session(id)?;
        let mut session = handle.lock();
        let ds = self.dataset(&session.state().dataset_id)?;
        let logged = self.commit(&mut session, event, ds)?;
        Ok(EventAck {
            event: logged,
            session: session.state().clone(),
        })
    }

    fn commit(&self, session: &mut Session, event: EventKind, ds: &Dataset) -> Result<SessionEvent, CatalogError> {
        let ts = Utc::now();
        session.check(&event, ts, &ds.vocabulary)?;
        let entry = SessionEvent {
            ts,
            session_id: session.id().to_string(),
            seq: session.next_seq(),
            event: event.clone(),
        };
        self.log.lock().append(&entry)?;
        let applied = session.submit_at(event, ts, &ds.vocabulary)?.clone();
        debug_assert_eq!(applied, entry);
        Ok(applied)
    }

    fn predictions(&self, session: &Session) -> Result<(PredictionGrid, &Dataset), CatalogError> {
        let st = session.state();
        let ds = self.dataset(&st.dataset_id)?;
        let model = self.model(&st.model_id)?;
        let segment = ds
            .segment(&st.segment_id)
            .ok_or_else(|| CatalogError::NotFound(format!("segment {:?}", st.segment_id)))?;
        let gt = ds
            .ground_truth(&st.segment_id)
            .ok_or_else(|| CatalogError::Internal(format!("no labels for {:?}", st.segment_id)))?;
        let grid = predict(
            model,
            segment,
            &st.selected_objects,
            gt,
            self.data.caches_for(&ds.dataset_id),
        )?;
        Ok((grid, ds))
    }

    pub fn grid(&self, id: &str) -> Result<GridView, CatalogError> {
        let handle = self.session(id)?;
        let session = handle.lock();
        if session.state().selected_objects.is_empty() {
            return Err(CatalogError::BadRequest("select at least one object first".into()));
        }
        let (grid, _) = self.predictions(&session)?;
        let display = session.render(&grid)?;
        let patterns = display
            .patterns::<f64>()
            .map_err(|e| CatalogError::Internal(e.to_string()))?;
        Ok(GridView {
            patterns,
            modification_summary: session.state().modification_summary(),
            missing_spy_rows: grid.missing_spy_rows.iter().cloned().collect(),
            display,
        })
    }

    /// Records the rating. Repeating the request on a recorded session
    /// returns the stored record unchanged.
    pub fn record(&self, id: &str, req: RecordRequest) -> Result<RatingRecord, CatalogError> {
        let handle = self.session(id)?;
        let mut session = handle.lock();
        if session.state().status == SessionStatus::Recorded {
            return session
                .state()
                .record
                .clone()
                .ok_or_else(|| CatalogError::Internal("recorded session without record".into()));
        }
        let (grid, ds) = self.predictions(&session)?;
        let gt = ds
            .ground_truth(&session.state().segment_id)
            .ok_or_else(|| CatalogError::Internal("missing labels".into()))?;
        let event = session.record_event(req.rating, req.comment, &grid, gt)?;
        self.commit(&mut session, event, ds)?;
        let record = session.state().record.clone().expect("record event sets the record");
        self.ratings.write().push(record.clone());
        Ok(record)
    }

    pub fn ratings(&self) -> Vec<RatingRecord> {
        self.ratings.read().clone()
    }

    pub fn analysis(&self) -> RatingsView {
        let ratings = self.ratings();
        // dataset-level F1 is only unambiguous with a single dataset
        let model_f1 = if self.model_f1.len() == 1 {
            self.model_f1.values().next().cloned().unwrap_or_default()
        } else {
            BTreeMap::new()
        };
        let options = AnalysisOptions {
            random_models: self
                .data
                .models
                .iter()
                .filter(|m| m.is_random())
                .map(|m| m.model_id.clone())
                .collect(),
            model_f1,
        };
        RatingsView {
            report: analyze(&ratings, &options),
            ratings,
        }
    }
}
