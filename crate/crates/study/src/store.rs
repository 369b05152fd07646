//! Append-only event log per session plus periodic snapshots.
//!
//! `<id>.events.jsonl` holds every event; `<id>.snapshot.json` holds the
//! state after the first `event_count` events. Loading starts from the
//! snapshot and replays the remaining tail.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::read_jsonl;
use crate::error::Result;
use crate::session::{SessionEvent, StudySession};

pub const DEFAULT_SNAPSHOT_EVERY: usize = 25;

#[derive(Clone, Debug)]
pub struct SessionStore {
    dir: Option<PathBuf>,
    snapshot_every: usize,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    event_count: usize,
    session: StudySession,
}

impl SessionStore {
    /// Keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self { dir: None, snapshot_every: DEFAULT_SNAPSHOT_EVERY }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir), snapshot_every: DEFAULT_SNAPSHOT_EVERY })
    }

    pub fn with_snapshot_every(mut self, n: usize) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn events_path(dir: &Path, session_id: &str) -> PathBuf {
        dir.join(format!("{session_id}.events.jsonl"))
    }

    pub fn snapshot_path(dir: &Path, session_id: &str) -> PathBuf {
        dir.join(format!("{session_id}.snapshot.json"))
    }

    /// Appends `event`; `session` is the state after it and `event_count`
    /// the log length including it.
    pub fn append(&self, session: &StudySession, event: &SessionEvent, event_count: usize) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let mut file = OpenOptions::new().create(true).append(true).open(Self::events_path(dir, &session.session_id))?;
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.flush()?;
        if event_count.is_multiple_of(self.snapshot_every) {
            self.snapshot(session, event_count)?;
        }
        Ok(())
    }

    pub fn snapshot(&self, session: &StudySession, event_count: usize) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = Self::snapshot_path(dir, &session.session_id);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&Snapshot { event_count, session: session.clone() })?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    /// Rebuilds one session from its log, starting at the snapshot when usable.
    pub fn load_session(dir: &Path, session_id: &str) -> Result<(StudySession, usize)> {
        let events: Vec<SessionEvent> = read_jsonl(&Self::events_path(dir, session_id))?;
        let snap_path = Self::snapshot_path(dir, session_id);
        if snap_path.exists() {
            let snap: Snapshot = serde_json::from_slice(&std::fs::read(&snap_path)?)?;
            if snap.event_count <= events.len() && snap.event_count > 0 {
                let mut session = snap.session;
                for e in &events[snap.event_count..] {
                    session.apply(e)?;
                }
                return Ok((session, events.len()));
            }
            log::warn!("ignoring stale snapshot for {session_id}");
        }
        Ok((StudySession::replay(&events)?, events.len()))
    }

    /// Every session in the store with its event count, sorted by session id.
    pub fn load_all(&self) -> Result<Vec<(StudySession, usize)>> {
        let Some(dir) = &self.dir else {
            return Ok(Vec::new());
        };
        load_dir(dir)
    }
}

/// Loads every `*.events.jsonl` log under `dir`.
pub fn load_dir(dir: &Path) -> Result<Vec<(StudySession, usize)>> {
    let mut ids: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".events.jsonl")).map(String::from))
        .collect();
    ids.sort();
    ids.iter().map(|id| SessionStore::load_session(dir, id)).collect()
}

/// Writes a complete log for `events`, one line each.
pub fn write_log(dir: &Path, session_id: &str, events: &[SessionEvent]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    crate::catalog::write_jsonl(&SessionStore::events_path(dir, session_id), events)
}
