//! Operator-in-the-loop retrieval service.
//!
//! An operator starts a session from a query record and gets one ranked
//! list per gallery camera. Each confirmed match is appended to the query
//! sequence, the sequence is fused again and the cameras still open are
//! re-ranked. [`Engine`] holds the state, [`Service`] adds the clock and the
//! optional journal, and [`router`] exposes both over HTTP under `/v1`.

mod engine;
mod http;
mod identicon;
mod journal;

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub use engine::{
    image_ref, CameraList, ConfirmRequest, Confirmation, CreateRequest, Engine, EngineError,
    ListEntry, LogDocument, LogEntry, RecordRef, SessionLog, SessionView, DEFAULT_TOP,
};
pub use http::{router, SharedService};
pub use identicon::identicon_svg;
pub use journal::{Event, Journal};

use crate::error::Result;

type Clock = Box<dyn Fn() -> u64 + Send>;

fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub struct Service {
    engine: Engine,
    journal: Option<Journal>,
    clock: Clock,
}

impl Service {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine,
            journal: None,
            clock: Box::new(wall_clock_ms),
        }
    }

    /// Replays `path` if it exists and journals every later mutation to it.
    pub fn with_journal(mut self, path: &Path) -> Result<Self> {
        self.journal = Some(Journal::open(path, &mut self.engine)?);
        Ok(self)
    }

    /// Replaces the wall clock, for tests and transcript replays.
    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn create(&mut self, request: CreateRequest) -> std::result::Result<u64, EngineError> {
        self.record(Event::Create {
            at_ms: (self.clock)(),
            request,
        })
    }

    pub fn confirm(
        &mut self,
        session: u64,
        request: ConfirmRequest,
    ) -> std::result::Result<(), EngineError> {
        self.record(Event::Confirm {
            at_ms: (self.clock)(),
            session,
            request,
        })
        .map(|_| ())
    }

    pub fn restart(&mut self, session: u64) -> std::result::Result<(), EngineError> {
        self.record(Event::Restart {
            at_ms: (self.clock)(),
            session,
        })
        .map(|_| ())
    }

    fn record(&mut self, event: Event) -> std::result::Result<u64, EngineError> {
        let id = event.apply(&mut self.engine)?;
        if let Some(j) = &mut self.journal {
            j.append(&event)
                .map_err(|e| EngineError::Journal(e.to_string()))?;
        }
        Ok(id)
    }

    /// Forces journal contents to disk.
    pub fn flush(&mut self) -> Result<()> {
        match &mut self.journal {
            Some(j) => j.sync(),
            None => Ok(()),
        }
    }
}
