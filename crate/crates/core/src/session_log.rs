//! Append-only JSONL session log.
//!
//! Every line is `{"event": ..., "t": ..., "payload": ...}`. The first line
//! is always `batch_created` and carries the full config (including seeds),
//! so a log file alone is enough to rebuild the session.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::oracle::OracleSpec;
use crate::preference::{Belief, PosteriorSummary, Query, ResponderKind, Selection};
use crate::profile::{FeatureKind, Sign, TorqueProfileFeatures};
use crate::query::{SessionConfig, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BatchCreated,
    QueryPresented,
    Choice,
    BeliefSnapshot,
    Finished,
    ValidationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub event: EventKind,
    pub t: DateTime<Utc>,
    pub payload: Value,
}

impl LogEvent {
    pub fn new<P: Serialize>(event: EventKind, t: DateTime<Utc>, payload: &P) -> Self {
        Self {
            event,
            t,
            payload: serde_json::to_value(payload).expect("payloads serialize to JSON"),
        }
    }

    pub fn decode<P: DeserializeOwned>(&self) -> Result<P, serde_json::Error> {
        P::deserialize(&self.payload)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize to JSON")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Live,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCreated {
    pub session_id: String,
    pub mode: SessionMode,
    pub config: SessionConfig,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    pub batch: Vec<TorqueProfileFeatures>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationMeta {
    pub index: usize,
    pub target: FeatureKind,
    pub sign: Sign,
    pub preferred_slot: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPresented {
    /// Number of comparisons completed before this query.
    pub iteration: usize,
    pub query: Query,
    #[serde(default)]
    pub validation: Option<ValidationMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRecorded {
    /// Comparison number, starting at 1.
    pub iteration: usize,
    pub selected: Selection,
    pub responder: ResponderKind,
    pub query: Query,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub iteration: usize,
    pub belief: Belief,
    pub summary: PosteriorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishedPayload {
    pub final_index: Option<usize>,
    pub final_profile: Option<TorqueProfileFeatures>,
    pub summary: PosteriorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub index: usize,
    pub target: FeatureKind,
    pub sign: Sign,
    pub selected: Selection,
    pub kept: bool,
    pub report: ValidationReport,
}

/// Destination for session events. Implementations must make the event
/// durable before returning.
pub trait EventSink {
    fn append(&mut self, event: &LogEvent) -> io::Result<()>;
}

impl EventSink for Vec<LogEvent> {
    fn append(&mut self, event: &LogEvent) -> io::Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// JSONL file sink. Each append is flushed and, when `durable`, synced.
#[derive(Debug)]
pub struct JsonlFile {
    file: File,
    durable: bool,
}

impl JsonlFile {
    pub fn create(path: &Path, durable: bool) -> io::Result<Self> {
        let file = OpenOptions::new().create_new(true).append(true).open(path)?;
        Ok(Self { file, durable })
    }

    pub fn append_to(path: &Path, durable: bool) -> io::Result<Self> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self { file, durable })
    }
}

impl EventSink for JsonlFile {
    fn append(&mut self, event: &LogEvent) -> io::Result<()> {
        let mut line = event.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        if self.durable {
            self.file.sync_data()?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogReadError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Reads every event. A trailing partial line (torn write) is ignored.
pub fn read_events<R: io::Read>(reader: R) -> Result<Vec<LogEvent>, LogReadError> {
    let lines: Vec<String> = BufReader::new(reader).lines().collect::<Result<_, _>>()?;
    let mut events = Vec::with_capacity(lines.len());
    let last = lines.len();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => events.push(e),
            Err(_) if i + 1 == last => break,
            Err(source) => return Err(LogReadError::Parse { line: i + 1, source }),
        }
    }
    Ok(events)
}

pub fn read_log_file(path: &Path) -> Result<Vec<LogEvent>, LogReadError> {
    read_events(File::open(path)?)
}

/// Cuts a torn trailing line off the log so new events can be appended.
/// Returns whether anything was removed.
pub fn truncate_torn_tail(path: &Path) -> io::Result<bool> {
    let bytes = std::fs::read(path)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(false);
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    Ok(true)
}
