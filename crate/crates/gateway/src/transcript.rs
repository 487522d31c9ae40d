//! JSON-lines audit log of provider requests.

use std::cell::RefCell;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::role::{RequestKind, Vars};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// Assigned when the record reaches the log.
    pub seq: u64,
    pub kind: RequestKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    pub provider: String,
    pub model: String,
    /// Absent when the provider default applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub template: String,
    #[serde(default, skip_serializing_if = "Vars::is_empty")]
    pub variables: Vars,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    /// Embedded texts for embed records.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub texts: Vec<String>,
    pub reprompt: u32,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cached: bool,
    /// Wall-clock time; recorded for live providers only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

thread_local! {
    static CAPTURE: RefCell<Option<Vec<TranscriptRecord>>> = const { RefCell::new(None) };
}

/// Routes records made on this thread into a buffer until `finish`.
pub(crate) struct Capture;

impl Capture {
    pub(crate) fn start() -> Self {
        CAPTURE.with(|c| *c.borrow_mut() = Some(Vec::new()));
        Capture
    }

    pub(crate) fn finish(self) -> Vec<TranscriptRecord> {
        CAPTURE.with(|c| c.borrow_mut().take()).unwrap_or_default()
    }
}

impl Drop for Capture {
    fn drop(&mut self) {
        CAPTURE.with(|c| c.borrow_mut().take());
    }
}

#[derive(Debug, Default)]
struct LogState {
    next_seq: u64,
    records: Vec<TranscriptRecord>,
    file: Option<File>,
}

/// Append-only transcript. Records made inside `Gateway::par_map` workers
/// are buffered per item and appended in item order, so the log is
/// independent of thread scheduling.
#[derive(Debug, Default)]
pub struct TranscriptLog {
    state: Mutex<LogState>,
}

impl TranscriptLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also appends every record to `path` as it arrives.
    pub fn to_file(path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::io(format!("opening {}", path.display()), e))?;
        Ok(TranscriptLog {
            state: Mutex::new(LogState {
                file: Some(file),
                ..LogState::default()
            }),
        })
    }

    pub fn record(&self, record: TranscriptRecord) {
        let captured = CAPTURE.with(|c| match c.borrow_mut().as_mut() {
            Some(buf) => {
                buf.push(record.clone());
                true
            }
            None => false,
        });
        if !captured {
            self.append(vec![record]);
        }
    }

    pub(crate) fn append(&self, records: Vec<TranscriptRecord>) {
        let mut state = self.state.lock().expect("transcript lock");
        for mut record in records {
            record.seq = state.next_seq;
            state.next_seq += 1;
            if let Some(file) = state.file.as_mut() {
                let line = serde_json::to_string(&record).expect("record serializes");
                if let Err(e) = writeln!(file, "{line}") {
                    log::warn!("transcript write failed: {e}");
                }
            }
            state.records.push(record);
        }
    }

    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.state.lock().expect("transcript lock").records.clone()
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("transcript lock").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_jsonl(&self) -> String {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}
