//! Session state machine behind the operator service.
//!
//! The engine is synchronous and clock-free: every mutating call takes the
//! current time in milliseconds from the caller. Rankings depend only on the
//! model, the dataset and the session's history, so replaying a transcript
//! reproduces every list.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use seqfuse_core::data::{CameraId, Dataset, PersonId, RecordIdx, Split};
use seqfuse_core::eval::{rank_gallery, Fuser};
use seqfuse_core::math::euclidean;
use seqfuse_core::model::{pool_fuse, FusionModel, PoolKind};

pub const DEFAULT_TOP: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("unknown record {0:?}")]
    UnknownRecord(String),
    #[error("camera {0} is already confirmed")]
    AlreadyConfirmed(CameraId),
    #[error("camera {0} is not in this session's scope")]
    CameraNotInScope(CameraId),
    #[error("record {record:?} is not a gallery record of camera {camera}")]
    RecordMismatch { camera: CameraId, record: String },
    #[error("{0}")]
    BadRequest(String),
    #[error("no model loaded; only the mean, max and single-query fusers are available")]
    NoModel,
    #[error("fusion failed: {0}")]
    Fusion(String),
    #[error("journal write failed: {0}")]
    Journal(String),
}

impl EngineError {
    pub fn status(&self) -> u16 {
        match self {
            EngineError::UnknownSession(_) | EngineError::UnknownRecord(_) => 404,
            EngineError::AlreadyConfirmed(_) => 409,
            EngineError::CameraNotInScope(_) | EngineError::RecordMismatch { .. } => 422,
            EngineError::BadRequest(_) => 400,
            EngineError::NoModel => 503,
            EngineError::Fusion(_) | EngineError::Journal(_) => 500,
        }
    }
}

type EngineResult<T> = Result<T, EngineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateRequest {
    pub query_record: String,
    #[serde(default = "default_fuser")]
    pub fuser: Fuser,
    /// Gallery cameras to search; defaults to every camera with gallery
    /// records other than the query's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<Vec<CameraId>>,
}

fn default_fuser() -> Fuser {
    Fuser::Gru
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmRequest {
    pub camera: CameraId,
    pub record: String,
    /// Time the operator spent on the list, measured by the client.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confirmation {
    pub camera: CameraId,
    pub record: String,
    pub at_ms: u64,
}

/// One row of a ranked list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListEntry {
    pub record: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<PersonId>,
    pub camera: CameraId,
    pub distance: f64,
    pub rank: usize,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraList {
    pub camera: CameraId,
    /// Gallery records of this camera before truncation.
    pub total: usize,
    pub entries: Vec<ListEntry>,
    /// Rank of the first record of the target identity (study mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_correct: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRef {
    pub record: String,
    pub camera: CameraId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<PersonId>,
    pub image: String,
}

/// Read-only snapshot returned by every session endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: u64,
    pub query: RecordRef,
    pub fuser: Fuser,
    /// Length of the fused sequence: the query plus confirmations.
    pub k: usize,
    pub scope: Vec<CameraId>,
    pub remaining: Vec<CameraId>,
    pub complete: bool,
    pub confirmations: Vec<Confirmation>,
    pub lists: Vec<CameraList>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Sequence length when the list was shown.
    pub k: usize,
    pub camera: CameraId,
    pub record: String,
    pub elapsed_ms: u64,
    /// Whether `elapsed_ms` came from the client.
    pub client_timed: bool,
    /// First-correct rank per remaining camera when the list was shown
    /// (study mode only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub first_correct: BTreeMap<CameraId, Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session: u64,
    pub query_record: String,
    pub fuser: Fuser,
    pub entries: Vec<LogEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogDocument {
    pub sessions: Vec<SessionLog>,
}

#[derive(Debug, Clone)]
struct Session {
    query: RecordIdx,
    fuser: Fuser,
    scope: Vec<CameraId>,
    confirmations: Vec<(Confirmation, RecordIdx)>,
    /// Full ranking per remaining camera: (record, distance).
    lists: BTreeMap<CameraId, Vec<(RecordIdx, f64)>>,
    shown_at_ms: u64,
    log: Vec<LogEntry>,
}

impl Session {
    fn remaining(&self) -> BTreeSet<CameraId> {
        let done: BTreeSet<CameraId> = self.confirmations.iter().map(|(c, _)| c.camera).collect();
        self.scope
            .iter()
            .copied()
            .filter(|c| !done.contains(c))
            .collect()
    }

    fn k(&self) -> usize {
        1 + self.confirmations.len()
    }
}

pub struct Engine {
    dataset: Arc<Dataset>,
    model: Option<Arc<FusionModel>>,
    study: bool,
    sessions: BTreeMap<u64, Session>,
    next_id: u64,
    /// Gallery features fused from `k` repeats, by `k`, indexed by record.
    repeated: BTreeMap<usize, BTreeMap<RecordIdx, Vec<f64>>>,
}

impl Engine {
    pub fn new(dataset: Arc<Dataset>, model: Option<Arc<FusionModel>>, study: bool) -> Self {
        Self {
            dataset,
            model,
            study,
            sessions: BTreeMap::new(),
            next_id: 1,
            repeated: BTreeMap::new(),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    pub fn study(&self) -> bool {
        self.study
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn create(&mut self, req: &CreateRequest, now_ms: u64) -> EngineResult<u64> {
        let ds = Arc::clone(&self.dataset);
        let query = ds
            .find(&req.query_record)
            .ok_or_else(|| EngineError::UnknownRecord(req.query_record.clone()))?;
        if req.fuser == Fuser::Gru && self.model.is_none() {
            return Err(EngineError::NoModel);
        }
        let query_cam = ds.record(query).camera;
        let with_gallery: BTreeSet<CameraId> = ds
            .split_records(Split::Gallery)
            .into_iter()
            .map(|i| ds.record(i).camera)
            .collect();
        let scope: Vec<CameraId> = match &req.scope {
            None => with_gallery
                .iter()
                .copied()
                .filter(|&c| c != query_cam)
                .collect(),
            Some(s) => {
                let set: BTreeSet<CameraId> = s.iter().copied().collect();
                if set.len() != s.len() {
                    return Err(EngineError::BadRequest("scope lists a camera twice".into()));
                }
                if let Some(&c) = set
                    .iter()
                    .find(|c| **c == 0 || usize::from(**c) > ds.camera_count())
                {
                    return Err(EngineError::BadRequest(format!(
                        "camera {c} does not exist"
                    )));
                }
                set.into_iter().collect()
            }
        };
        if scope.is_empty() {
            return Err(EngineError::BadRequest("the gallery scope is empty".into()));
        }
        let mut session = Session {
            query,
            fuser: req.fuser,
            scope,
            confirmations: Vec::new(),
            lists: BTreeMap::new(),
            shown_at_ms: now_ms,
            log: Vec::new(),
        };
        self.rerank(&mut session)?;
        let id = self.next_id;
        self.next_id += 1;
        self.sessions.insert(id, session);
        Ok(id)
    }

    pub fn confirm(&mut self, id: u64, req: &ConfirmRequest, now_ms: u64) -> EngineResult<()> {
        let ds = Arc::clone(&self.dataset);
        let mut session = self
            .sessions
            .get(&id)
            .cloned()
            .ok_or(EngineError::UnknownSession(id))?;
        if session
            .confirmations
            .iter()
            .any(|(c, _)| c.camera == req.camera)
        {
            return Err(EngineError::AlreadyConfirmed(req.camera));
        }
        let Some(list) = session.lists.get(&req.camera) else {
            return Err(EngineError::CameraNotInScope(req.camera));
        };
        let mismatch = || EngineError::RecordMismatch {
            camera: req.camera,
            record: req.record.clone(),
        };
        let idx = ds.find(&req.record).ok_or_else(mismatch)?;
        if !list.iter().any(|&(r, _)| r == idx) {
            return Err(mismatch());
        }
        let first_correct = self.first_correct_map(&session);
        session.log.push(LogEntry {
            k: session.k(),
            camera: req.camera,
            record: req.record.clone(),
            elapsed_ms: req
                .elapsed_ms
                .unwrap_or(now_ms.saturating_sub(session.shown_at_ms)),
            client_timed: req.elapsed_ms.is_some(),
            first_correct,
        });
        session.confirmations.push((
            Confirmation {
                camera: req.camera,
                record: req.record.clone(),
                at_ms: now_ms,
            },
            idx,
        ));
        self.rerank(&mut session)?;
        session.shown_at_ms = now_ms;
        self.sessions.insert(id, session);
        Ok(())
    }

    /// Drops every confirmation; the interaction log is kept.
    pub fn restart(&mut self, id: u64, now_ms: u64) -> EngineResult<()> {
        let mut session = self
            .sessions
            .get(&id)
            .cloned()
            .ok_or(EngineError::UnknownSession(id))?;
        session.confirmations.clear();
        self.rerank(&mut session)?;
        session.shown_at_ms = now_ms;
        self.sessions.insert(id, session);
        Ok(())
    }

    pub fn view(&self, id: u64, top: usize) -> EngineResult<SessionView> {
        let s = self
            .sessions
            .get(&id)
            .ok_or(EngineError::UnknownSession(id))?;
        Ok(SessionView {
            id,
            query: self.record_ref(s.query),
            fuser: s.fuser,
            k: s.k(),
            scope: s.scope.clone(),
            remaining: s.remaining().into_iter().collect(),
            complete: s.lists.is_empty(),
            confirmations: s.confirmations.iter().map(|(c, _)| c.clone()).collect(),
            lists: s
                .lists
                .keys()
                .map(|&c| self.camera_list(s, c, top))
                .collect(),
        })
    }

    /// Lists of one remaining camera, or all of them.
    pub fn lists(
        &self,
        id: u64,
        camera: Option<CameraId>,
        top: usize,
    ) -> EngineResult<Vec<CameraList>> {
        let s = self
            .sessions
            .get(&id)
            .ok_or(EngineError::UnknownSession(id))?;
        match camera {
            None => Ok(s
                .lists
                .keys()
                .map(|&c| self.camera_list(s, c, top))
                .collect()),
            Some(c) if s.lists.contains_key(&c) => Ok(vec![self.camera_list(s, c, top)]),
            Some(c) if s.scope.contains(&c) => Err(EngineError::AlreadyConfirmed(c)),
            Some(c) => Err(EngineError::CameraNotInScope(c)),
        }
    }

    pub fn export_logs(&self) -> LogDocument {
        self.log_document(|_| true)
    }

    /// Logs of one session only.
    pub fn export_session_log(&self, id: u64) -> Result<LogDocument, EngineError> {
        if !self.sessions.contains_key(&id) {
            return Err(EngineError::UnknownSession(id));
        }
        Ok(self.log_document(|s| s == id))
    }

    fn log_document(&self, keep: impl Fn(u64) -> bool) -> LogDocument {
        LogDocument {
            sessions: self
                .sessions
                .iter()
                .filter(|(&id, _)| keep(id))
                .map(|(&id, s)| SessionLog {
                    session: id,
                    query_record: self.dataset.record(s.query).id.clone(),
                    fuser: s.fuser,
                    entries: s.log.clone(),
                })
                .collect(),
        }
    }

    pub fn record_ref(&self, idx: RecordIdx) -> RecordRef {
        let r = self.dataset.record(idx);
        RecordRef {
            record: r.id.clone(),
            camera: r.camera,
            pid: self.study.then_some(r.pid),
            image: image_ref(&r.id, r.image.as_deref()),
        }
    }

    fn camera_list(&self, s: &Session, camera: CameraId, top: usize) -> CameraList {
        let ranked = &s.lists[&camera];
        let entries = ranked
            .iter()
            .take(top)
            .enumerate()
            .map(|(i, &(idx, distance))| {
                let r = self.dataset.record(idx);
                ListEntry {
                    record: r.id.clone(),
                    pid: self.study.then_some(r.pid),
                    camera,
                    distance,
                    rank: i + 1,
                    image: image_ref(&r.id, r.image.as_deref()),
                }
            })
            .collect();
        CameraList {
            camera,
            total: ranked.len(),
            entries,
            first_correct: if self.study {
                self.first_correct(s, camera)
            } else {
                None
            },
        }
    }

    fn first_correct(&self, s: &Session, camera: CameraId) -> Option<usize> {
        let pid = self.dataset.record(s.query).pid;
        s.lists
            .get(&camera)?
            .iter()
            .position(|&(idx, _)| self.dataset.record(idx).pid == pid)
            .map(|p| p + 1)
    }

    fn first_correct_map(&self, s: &Session) -> BTreeMap<CameraId, Option<usize>> {
        if !self.study {
            return BTreeMap::new();
        }
        s.lists
            .keys()
            .map(|&c| (c, self.first_correct(s, c)))
            .collect()
    }

    /// Recomputes the fused query and the ranking of every remaining camera.
    fn rerank(&mut self, s: &mut Session) -> EngineResult<()> {
        let ds = Arc::clone(&self.dataset);
        let fusion = |e: seqfuse_core::Error| EngineError::Fusion(e.to_string());
        let mut sequence: Vec<&[f64]> = vec![ds.feature(s.query)];
        sequence.extend(s.confirmations.iter().map(|&(_, idx)| ds.feature(idx)));
        let k = sequence.len();
        let query = match s.fuser {
            Fuser::Gru => {
                let model = self.model.as_ref().ok_or(EngineError::NoModel)?;
                model
                    .fuse_sequence(&sequence)
                    .map_err(fusion)?
                    .last()
                    .to_vec()
            }
            Fuser::Mean => pool_fuse(PoolKind::Mean, &sequence).map_err(fusion)?,
            Fuser::Max => pool_fuse(PoolKind::Max, &sequence).map_err(fusion)?,
            Fuser::SingleQuery => sequence[0].to_vec(),
        };
        let mut lists = BTreeMap::new();
        for camera in s.remaining() {
            let candidates: Vec<RecordIdx> = ds
                .camera_records(Split::Gallery, camera)
                .into_iter()
                .filter(|&i| i != s.query)
                .collect();
            let features: Vec<Vec<f64>> = match s.fuser {
                Fuser::Gru => {
                    let model = self.model.as_ref().ok_or(EngineError::NoModel)?;
                    let cache = self.repeated.entry(k).or_default();
                    let mut out = Vec::with_capacity(candidates.len());
                    for &i in &candidates {
                        let f = match cache.entry(i) {
                            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                            std::collections::btree_map::Entry::Vacant(e) => {
                                e.insert(model.repeated(ds.feature(i), k).map_err(fusion)?)
                            }
                        };
                        out.push(f.clone());
                    }
                    out
                }
                _ => candidates.iter().map(|&i| ds.feature(i).to_vec()).collect(),
            };
            let ranked = rank_gallery(&query, &features)
                .into_iter()
                .map(|p| (candidates[p], euclidean(&query, &features[p])))
                .collect();
            lists.insert(camera, ranked);
        }
        s.lists = lists;
        Ok(())
    }
}

/// The record's image URI, or the service's identicon route.
pub fn image_ref(record: &str, image: Option<&str>) -> String {
    match image {
        Some(uri) => uri.to_string(),
        None => format!("/v1/records/{}/thumbnail", percent_encode(record)),
    }
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}
