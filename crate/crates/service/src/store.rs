//! Append-only JSON Lines event log, one file per UTC day, plus a small
//! manifest listing the files.
//!
//! Each event is written as a single `write` of one line and synced before
//! the caller acknowledges it. On open, a torn final line left by a crash is
//! cut off; a malformed line anywhere else is an error.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ikiwisi_core::SessionEvent;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    files: Vec<String>,
}

#[derive(Debug)]
pub struct EventLog {
    dir: PathBuf,
    manifest: Manifest,
    open: Option<(String, File)>,
}

fn file_name_for(event: &SessionEvent) -> String {
    format!("events-{}.jsonl", event.ts.format("%Y-%m-%d"))
}

fn is_log_file(name: &str) -> bool {
    name.starts_with("events-") && name.ends_with(".jsonl")
}

impl EventLog {
    /// Opens (creating if needed) the log directory and returns every
    /// stored event in file order.
    pub fn open(dir: &Path) -> Result<(Self, Vec<SessionEvent>), StoreError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut files: Vec<String> = fs::read_dir(dir)
            .map_err(io(dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| is_log_file(n))
            .collect();
        files.sort();

        let mut events = Vec::new();
        for name in &files {
            events.extend(read_log_file(&dir.join(name))?);
        }
        let log = Self {
            dir: dir.to_path_buf(),
            manifest: Manifest { format: 1, files },
            open: None,
        };
        log.write_manifest()?;
        Ok((log, events))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_manifest(&self) -> Result<(), StoreError> {
        let path = self.dir.join(MANIFEST);
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&tmp, text + "\n").map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))
    }

    /// Durably appends one event.
    pub fn append(&mut self, event: &SessionEvent) -> Result<(), StoreError> {
        let name = file_name_for(event);
        if self.open.as_ref().map(|(n, _)| n) != Some(&name) {
            let path = self.dir.join(&name);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(io(&path))?;
            if !self.manifest.files.contains(&name) {
                self.manifest.files.push(name.clone());
                self.manifest.files.sort();
                self.write_manifest()?;
            }
            self.open = Some((name, file));
        }
        let (name, file) = self.open.as_mut().expect("opened above");
        let path = self.dir.join(name.as_str());
        let mut line = serde_json::to_vec(event).expect("events serialize");
        line.push(b'\n');
        file.write_all(&line).map_err(io(&path))?;
        file.sync_data().map_err(io(&path))
    }
}

fn read_log_file(path: &Path) -> Result<Vec<SessionEvent>, StoreError> {
    let bytes = fs::read(path).map_err(io(path))?;
    // a crash mid-append can leave a final line without its newline
    let complete = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(i) => i + 1,
        None => 0,
    };
    if complete < bytes.len() {
        tracing::warn!(path = %path.display(), dropped = bytes.len() - complete, "truncating torn final line");
        let file = OpenOptions::new().write(true).open(path).map_err(io(path))?;
        file.set_len(complete as u64).map_err(io(path))?;
        file.sync_all().map_err(io(path))?;
    }
    let mut events = Vec::new();
    for (i, line) in BufReader::new(&bytes[..complete]).lines().enumerate() {
        let line = line.map_err(io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Groups events by session, ordered by sequence number.
pub fn group_by_session(events: Vec<SessionEvent>) -> BTreeMap<String, Vec<SessionEvent>> {
    let mut out: BTreeMap<String, Vec<SessionEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.session_id.clone()).or_default().push(e);
    }
    for list in out.values_mut() {
        list.sort_by_key(|e| e.seq);
    }
    out
}
