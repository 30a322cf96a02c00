//! Append-only JSONL files in the data directory. Every append is synced
//! to disk before it returns.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use pairrank_core::ComparisonRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const COMPARISONS_FILE: &str = "comparisons.jsonl";
pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const CATALOG_FILE: &str = "catalog.json";

/// One logged vote: the comparison plus the ticket that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    #[serde(flatten)]
    pub record: ComparisonRecord,
    pub ticket: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub id: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug)]
struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens `path` for appending and returns its parsed lines. A final line
    /// without a newline is a torn write from a crash and is cut off; any
    /// other bad line is an error.
    fn open<T: DeserializeOwned>(path: PathBuf) -> Result<(Journal, Vec<T>)> {
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(ServiceError::io(&path, e)),
        };
        let mut items = Vec::new();
        let mut valid_len = 0;
        let mut rest = text.as_str();
        let mut line_no = 0;
        while !rest.is_empty() {
            line_no += 1;
            let (line, complete) = match rest.find('\n') {
                Some(i) => (&rest[..i], true),
                None => (rest, false),
            };
            rest = if complete { &rest[line.len() + 1..] } else { "" };
            if line.trim().is_empty() {
                valid_len += line.len() + usize::from(complete);
                continue;
            }
            if !complete {
                break;
            }
            let item = serde_json::from_str::<T>(line)
                .map_err(|e| ServiceError::CorruptLog { path: path.clone(), line: line_no, message: e.to_string() })?;
            items.push(item);
            valid_len += line.len() + 1;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| ServiceError::io(&path, e))?;
        if valid_len < text.len() {
            file.set_len(valid_len as u64).map_err(|e| ServiceError::io(&path, e))?;
            file.sync_data().map_err(|e| ServiceError::io(&path, e))?;
        }
        Ok((Journal { path, file }, items))
    }

    fn append<T: Serialize>(&mut self, item: &T) -> Result<()> {
        let mut line = serde_json::to_string(item).map_err(pairrank_core::Error::from)?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| ServiceError::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| ServiceError::io(&self.path, e))
    }
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    comparisons: Journal,
    sessions: Journal,
}

impl Store {
    pub fn open(dir: &Path) -> Result<(Store, Vec<LogEntry>, Vec<SessionEntry>)> {
        std::fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
        let (comparisons, entries) = Journal::open(dir.join(COMPARISONS_FILE))?;
        let (sessions, session_entries) = Journal::open(dir.join(SESSIONS_FILE))?;
        Ok((Store { dir: dir.to_path_buf(), comparisons, sessions }, entries, session_entries))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append_vote(&mut self, entry: &LogEntry) -> Result<()> {
        self.comparisons.append(entry)
    }

    pub fn append_session(&mut self, entry: &SessionEntry) -> Result<()> {
        self.sessions.append(entry)
    }
}
