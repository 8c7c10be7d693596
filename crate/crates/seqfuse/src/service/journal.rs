//! Append-only session journal.
//!
//! Every successful mutation is written as one JSON line and flushed before
//! the response is sent. Replaying the journal into a fresh engine rebuilds
//! the sessions, their lists and their interaction logs.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::engine::{ConfirmRequest, CreateRequest, Engine};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    Create {
        at_ms: u64,
        request: CreateRequest,
    },
    Confirm {
        at_ms: u64,
        session: u64,
        request: ConfirmRequest,
    },
    Restart {
        at_ms: u64,
        session: u64,
    },
}

impl Event {
    /// Applies the event; returns the session it touched.
    pub fn apply(
        &self,
        engine: &mut Engine,
    ) -> std::result::Result<u64, super::engine::EngineError> {
        match self {
            Event::Create { at_ms, request } => engine.create(request, *at_ms),
            Event::Confirm {
                at_ms,
                session,
                request,
            } => engine.confirm(*session, request, *at_ms).map(|()| *session),
            Event::Restart { at_ms, session } => {
                engine.restart(*session, *at_ms).map(|()| *session)
            }
        }
    }
}

pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Replays an existing journal into `engine`, then opens it for appending.
    pub fn open(path: &Path, engine: &mut Engine) -> Result<Self> {
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parse = |detail: String| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    detail,
                };
                let event: Event = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
                event
                    .apply(engine)
                    .map_err(|e| parse(format!("replay failed: {e}")))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, event: &Event) -> Result<()> {
        let mut line =
            serde_json::to_vec(event).map_err(|e| Error::format(&self.path, e.to_string()))?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn sync(&mut self) -> Result<()> {
        self.file.sync_all().map_err(|e| Error::io(&self.path, e))
    }
}
