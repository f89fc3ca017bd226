//! Append-only NDJSON event log with a rebuildable offset index.
//!
//! The log line is the commit record: an event is acknowledged only after
//! its line has been written and synced. On open, a torn trailing line left
//! by a crash is cut off and the index is rebuilt from the log.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use super::event::{EventDraft, InteractionEvent};
use crate::model::SessionId;

pub const LOG_FILE: &str = "events.ndjson";
pub const INDEX_FILE: &str = "events.idx";

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("event log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown session `{0}`")]
    UnknownSession(SessionId),
    #[error("malformed event: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyncPolicy {
    /// fsync the log after every append.
    #[default]
    Always,
    /// Leave flushing to the OS.
    Never,
}

#[derive(Debug)]
pub struct EventLog {
    session_id: SessionId,
    path: PathBuf,
    file: File,
    index: File,
    sync: SyncPolicy,
    len: u64,
    bytes: u64,
    last_id: u64,
    last_ts: u64,
    /// Bytes discarded from a torn tail when the log was opened.
    pub recovered_bytes: u64,
}

impl EventLog {
    pub fn open(dir: &Path, session_id: SessionId, sync: SyncPolicy) -> Result<Self, TelemetryError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;

        let mut offsets = Vec::new();
        let mut good_end = 0usize;
        let (mut last_id, mut last_ts) = (0, 0);
        while let Some(nl) = raw[good_end..].iter().position(|&b| b == b'\n') {
            let line = &raw[good_end..good_end + nl];
            match serde_json::from_slice::<InteractionEvent>(line) {
                Ok(ev) if ev.event_id > last_id => {
                    offsets.push((ev.event_id, good_end as u64));
                    last_id = ev.event_id;
                    last_ts = ev.timestamp;
                    good_end += nl + 1;
                }
                _ => break,
            }
        }
        let recovered_bytes = (raw.len() - good_end) as u64;
        if recovered_bytes > 0 {
            file.set_len(good_end as u64)?;
            file.sync_all()?;
        }

        let mut index = OpenOptions::new().create(true).read(true).write(true).truncate(true).open(dir.join(INDEX_FILE))?;
        let mut buf = Vec::with_capacity(offsets.len() * 16);
        for (id, off) in &offsets {
            buf.extend_from_slice(&id.to_le_bytes());
            buf.extend_from_slice(&off.to_le_bytes());
        }
        index.write_all(&buf)?;
        index.sync_all()?;

        Ok(Self {
            session_id,
            path,
            file,
            index,
            sync,
            len: offsets.len() as u64,
            bytes: good_end as u64,
            last_id,
            last_ts,
            recovered_bytes,
        })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Assigns the next id, keeps timestamps non-decreasing, and appends.
    pub fn append(&mut self, draft: EventDraft, timestamp: u64) -> Result<InteractionEvent, TelemetryError> {
        let event = InteractionEvent {
            event_id: self.last_id + 1,
            timestamp: timestamp.max(self.last_ts),
            session_id: self.session_id.clone(),
            tile_id: draft.tile_id,
            kind: draft.kind,
            payload: draft.payload,
        };
        let mut line = serde_json::to_vec(&event).map_err(|e| TelemetryError::Malformed(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        if self.sync == SyncPolicy::Always {
            self.file.sync_data()?;
        }
        let mut entry = [0u8; 16];
        entry[..8].copy_from_slice(&event.event_id.to_le_bytes());
        entry[8..].copy_from_slice(&self.bytes.to_le_bytes());
        self.index.write_all(&entry)?;

        self.bytes += line.len() as u64;
        self.len += 1;
        self.last_id = event.event_id;
        self.last_ts = event.timestamp;
        Ok(event)
    }

    /// Raw NDJSON bytes of every committed event.
    pub fn export_ndjson(&self) -> Result<Vec<u8>, TelemetryError> {
        let mut f = File::open(&self.path)?;
        let mut buf = Vec::with_capacity(self.bytes as usize);
        (&mut f).take(self.bytes).read_to_end(&mut buf)?;
        Ok(buf)
    }

    pub fn scan(&self) -> Result<Vec<InteractionEvent>, TelemetryError> {
        parse_ndjson(&self.export_ndjson()?)
    }

    /// Events with `event_id > after`, located through the index.
    pub fn scan_after(&self, after: u64) -> Result<Vec<InteractionEvent>, TelemetryError> {
        let mut idx = Vec::new();
        let mut f = File::open(self.path.with_file_name(INDEX_FILE))?;
        f.read_to_end(&mut idx)?;
        let start = idx
            .chunks_exact(16)
            .find(|e| u64::from_le_bytes(e[..8].try_into().unwrap()) > after)
            .map(|e| u64::from_le_bytes(e[8..].try_into().unwrap()));
        let Some(start) = start else {
            return Ok(Vec::new());
        };
        let mut log = File::open(&self.path)?;
        log.seek(SeekFrom::Start(start))?;
        let mut buf = Vec::new();
        log.take(self.bytes - start).read_to_end(&mut buf)?;
        parse_ndjson(&buf)
    }
}

pub fn parse_ndjson(bytes: &[u8]) -> Result<Vec<InteractionEvent>, TelemetryError> {
    bytes
        .split(|&b| b == b'\n')
        .filter(|l| !l.iter().all(u8::is_ascii_whitespace))
        .map(|l| serde_json::from_slice(l).map_err(|e| TelemetryError::Malformed(e.to_string())))
        .collect()
}

/// Event logs for many sessions under one root directory, one
/// subdirectory per session.
#[derive(Debug)]
pub struct EventStore {
    root: PathBuf,
    sync: SyncPolicy,
    logs: Mutex<HashMap<SessionId, Arc<Mutex<EventLog>>>>,
}

impl EventStore {
    pub fn new(root: impl Into<PathBuf>, sync: SyncPolicy) -> Self {
        Self { root: root.into(), sync, logs: Mutex::new(HashMap::new()) }
    }

    pub fn session_dir(&self, session: &SessionId) -> PathBuf {
        self.root.join(session.as_str())
    }

    /// Opens (or recovers) the log of a session so it can accept events.
    pub fn register(&self, session: &SessionId) -> Result<(), TelemetryError> {
        let mut logs = self.logs.lock().unwrap();
        if !logs.contains_key(session) {
            let log = EventLog::open(&self.session_dir(session), session.clone(), self.sync)?;
            logs.insert(session.clone(), Arc::new(Mutex::new(log)));
        }
        Ok(())
    }

    fn log(&self, session: &SessionId) -> Result<Arc<Mutex<EventLog>>, TelemetryError> {
        self.logs.lock().unwrap().get(session).cloned().ok_or_else(|| TelemetryError::UnknownSession(session.clone()))
    }

    pub fn log_event(&self, session: &SessionId, draft: EventDraft) -> Result<InteractionEvent, TelemetryError> {
        let log = self.log(session)?;
        let mut log = log.lock().unwrap();
        log.append(draft, crate::now_ms())
    }

    pub fn scan(&self, session: &SessionId) -> Result<Vec<InteractionEvent>, TelemetryError> {
        self.log(session)?.lock().unwrap().scan()
    }

    pub fn export_ndjson(&self, session: &SessionId) -> Result<Vec<u8>, TelemetryError> {
        self.log(session)?.lock().unwrap().export_ndjson()
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::telemetry::EventKind;

    fn draft(n: u64) -> EventDraft {
        EventDraft::session(EventKind::ModifyText, json!({ "scene_prompt": format!("prompt {n}") }))
    }

    #[test]
    fn append_then_scan_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = EventLog::open(dir.path(), "s".into(), SyncPolicy::Always).unwrap();
        for n in 0..5 {
            log.append(draft(n), 100 - n).unwrap();
        }
        let events = log.scan().unwrap();
        assert_eq!(events.iter().map(|e| e.event_id).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        // clock going backwards is clamped, keeping (timestamp, id) ordered
        assert!(events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(log.scan_after(3).unwrap().iter().map(|e| e.event_id).collect::<Vec<_>>(), vec![4, 5]);
    }

    #[test]
    fn torn_tail_is_cut_on_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut log = EventLog::open(dir.path(), "s".into(), SyncPolicy::Never).unwrap();
            for n in 0..3 {
                log.append(draft(n), n).unwrap();
            }
        }
        let path = dir.path().join(LOG_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"event_id":4,"timesta"#).unwrap();
        drop(f);
        let mut log = EventLog::open(dir.path(), "s".into(), SyncPolicy::Never).unwrap();
        assert!(log.recovered_bytes > 0);
        assert_eq!(log.len(), 3);
        let ev = log.append(draft(9), 9).unwrap();
        assert_eq!(ev.event_id, 4);
        assert_eq!(log.scan().unwrap().len(), 4);
    }

    #[test]
    fn store_keeps_sessions_apart() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::new(dir.path(), SyncPolicy::Never);
        let (a, b) = (SessionId::from("a"), SessionId::from("b"));
        store.register(&a).unwrap();
        store.register(&b).unwrap();
        for n in 0..10 {
            store.log_event(if n % 3 == 0 { &a } else { &b }, draft(n)).unwrap();
        }
        for s in [&a, &b] {
            let events = store.scan(s).unwrap();
            assert!(events.iter().all(|e| &e.session_id == s));
            assert!(events.windows(2).all(|w| (w[0].timestamp, w[0].event_id) < (w[1].timestamp, w[1].event_id)));
        }
        assert!(matches!(store.log_event(&"c".into(), draft(0)), Err(TelemetryError::UnknownSession(_))));
    }
}
