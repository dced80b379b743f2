//! Append-only event log.
//!
//! One [`EventRecord`] per line in canonical JSON. Records are facts already
//! decided by the server; replay folds them through [`ServerState::apply`],
//! the same function the live server uses, so no decision logic runs twice.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ServerState;
use crate::activity::{Activity, ActivityId, Answer, ParticipantId, Timestamp};
use crate::geo::{GeoPoint, Zone};
use crate::wire::to_canonical;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: u64,
    pub at: Timestamp,
    pub payload: RecordPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordPayload {
    ActivityCreated {
        activity: Activity,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        calendar_uid: Option<String>,
    },
    InviteResponded {
        activity: ActivityId,
        who: ParticipantId,
        answer: Answer,
    },
    Armed {
        activity: ActivityId,
        who: ParticipantId,
        zone: Zone,
    },
    Disarmed {
        activity: ActivityId,
        who: ParticipantId,
    },
    FixAccepted {
        activity: ActivityId,
        who: ParticipantId,
        point: GeoPoint,
        at: Timestamp,
    },
    ArrivalRecorded {
        activity: ActivityId,
        who: ParticipantId,
        at: Timestamp,
    },
    TaskCompleted {
        activity: ActivityId,
        who: ParticipantId,
        at: Timestamp,
    },
    CursorAdvanced {
        who: ParticipantId,
        cursor: u64,
    },
}

impl EventRecord {
    /// Canonical single-line encoding, without the trailing newline.
    pub fn to_line(&self) -> String {
        to_canonical(&serde_json::to_value(self).expect("records serialize"))
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Replay stopped at `index`; `recovered` holds the state built from every
/// earlier record.
#[derive(Debug, Error)]
#[error("corrupt record at index {index}: {reason}")]
pub struct CorruptRecord {
    pub index: u64,
    pub reason: String,
    pub recovered: Box<ServerState>,
}

pub fn append<W: Write>(out: &mut W, record: &EventRecord) -> io::Result<()> {
    let mut line = record.to_line();
    line.push('\n');
    out.write_all(line.as_bytes())
}

/// Fold in-memory records into a fresh state.
pub fn replay<'a, I>(records: I) -> Result<ServerState, CorruptRecord>
where
    I: IntoIterator<Item = &'a EventRecord>,
{
    let mut state = ServerState::default();
    for record in records {
        if let Err(e) = state.apply(record) {
            return Err(CorruptRecord {
                index: record.index,
                reason: e.to_string(),
                recovered: Box::new(state),
            });
        }
    }
    Ok(state)
}

/// Replay a log file's contents. Blank lines are not allowed; a line that
/// fails to parse or apply (a truncated final write, typically) stops the
/// replay with its zero-based position as the index.
pub fn replay_text(text: &str) -> Result<ServerState, CorruptRecord> {
    let mut state = ServerState::default();
    for (pos, line) in text.lines().enumerate() {
        let index = pos as u64;
        let outcome = EventRecord::from_line(line)
            .map_err(|e| e.to_string())
            .and_then(|r| state.apply(&r).map(|_| ()).map_err(|e| e.to_string()));
        if let Err(reason) = outcome {
            return Err(CorruptRecord {
                index,
                reason,
                recovered: Box::new(state),
            });
        }
    }
    Ok(state)
}

pub fn replay_reader<R: BufRead>(reader: R) -> io::Result<Result<ServerState, CorruptRecord>> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    Ok(replay_text(&text))
}
