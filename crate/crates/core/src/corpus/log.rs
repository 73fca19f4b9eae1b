//! Line-oriented label log and chat import files.
//!
//! Both are UTF-8 with one JSON object per line. The label log is only ever
//! appended to.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ChatRecord;
use crate::error::{Error, Result};
use crate::label::{LabelSource, SentimentLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub timestamp: DateTime<Utc>,
    pub utterance_id: String,
    pub label: SentimentLabel,
    pub source: LabelSource,
    pub iteration: u32,
}

impl LabelEvent {
    pub fn now(
        utterance_id: &str,
        label: SentimentLabel,
        source: LabelSource,
        iteration: u32,
    ) -> Self {
        LabelEvent {
            timestamp: Utc::now(),
            utterance_id: utterance_id.to_string(),
            label,
            source,
            iteration,
        }
    }
}

/// Append-only label log.
#[derive(Debug, Clone)]
pub struct LabelLog {
    path: PathBuf,
}

impl LabelLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        LabelLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, events: &[LabelEvent]) -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut buf = String::new();
        for event in events {
            buf.push_str(&serde_json::to_string(event)?);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn read(&self) -> Result<Vec<LabelEvent>> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        read_label_log(&self.path)
    }
}

pub fn read_label_log(path: &Path) -> Result<Vec<LabelEvent>> {
    read_lines(path)
}

pub fn write_label_log(path: &Path, events: &[LabelEvent]) -> Result<()> {
    write_lines(path, events)
}

pub fn read_chat_file(path: &Path) -> Result<Vec<ChatRecord>> {
    read_lines(path)
}

pub fn write_chat_file(path: &Path, records: &[ChatRecord]) -> Result<()> {
    write_lines(path, records)
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            Error::invalid(format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r)?);
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
