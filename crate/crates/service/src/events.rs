//! The append-only event log: one JSON object per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use sentinel_core::{
    AttributeSet, AudienceId, Decision, IncidentReport, PostId, ThresholdAdjustment, UserId,
    WarningMessage,
};
use serde::{Deserialize, Serialize};

use crate::engine::EngineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    PostCreated {
        post_id: PostId,
        user_id: UserId,
        text: String,
        declared_audience: AudienceId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        annotations: Option<AttributeSet>,
    },
    WarningRaised {
        warning: WarningMessage,
    },
    UserAction {
        post_id: PostId,
        action: Decision,
    },
    ThresholdAdjusted {
        user_id: UserId,
        adjustment: ThresholdAdjustment,
    },
    PostDeleted {
        post_id: PostId,
        detected_sas: AttributeSet,
        prompt: bool,
    },
    IncidentReported {
        report: IncidentReport,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: Event,
}

/// Where committed events go before they are applied.
#[derive(Debug, Default)]
pub enum Journal {
    /// Nothing is kept; used by replay and by the simulator.
    #[default]
    Discard,
    Memory(Vec<EventRecord>),
    File(File),
}

impl Journal {
    /// Opens (or creates) a log file for appending.
    pub fn open(path: &Path) -> std::io::Result<Journal> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Journal::File(file))
    }

    /// Writes a batch with a single write call and flushes it to disk.
    pub fn append(&mut self, records: &[EventRecord]) -> std::io::Result<()> {
        match self {
            Journal::Discard => Ok(()),
            Journal::Memory(log) => {
                log.extend_from_slice(records);
                Ok(())
            }
            Journal::File(file) => {
                let mut buf = Vec::new();
                for r in records {
                    serde_json::to_writer(&mut buf, r).map_err(std::io::Error::other)?;
                    buf.push(b'\n');
                }
                file.write_all(&buf)?;
                file.flush()?;
                file.sync_data()
            }
        }
    }

    pub fn records(&self) -> Option<&[EventRecord]> {
        match self {
            Journal::Memory(log) => Some(log),
            _ => None,
        }
    }
}

/// Reads a JSON-lines log. Blank lines are skipped.
pub fn read_log(path: &Path) -> Result<Vec<EventRecord>, EngineError> {
    let file = File::open(path)?;
    parse_log(BufReader::new(file))
}

pub fn parse_log(reader: impl BufRead) -> Result<Vec<EventRecord>, EngineError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| EngineError::Replay(format!("log line {}: {e}", i + 1)))?;
        out.push(record);
    }
    Ok(out)
}
