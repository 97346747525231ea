//! Frames of the live session stream.

use antsteer::SteeringUpdate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WireKind {
    Snapshot,
    Event,
    SteeringAck,
    Error,
}

/// One frame. `sequence` starts at 0 and grows by one per frame on a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub kind: WireKind,
    pub session_id: String,
    pub payload: Value,
    pub sequence: u64,
}

/// Numbers the frames of one stream.
#[derive(Debug)]
pub struct Sequencer {
    session_id: String,
    next: u64,
}

impl Sequencer {
    pub fn new(session_id: impl Into<String>) -> Self {
        Sequencer { session_id: session_id.into(), next: 0 }
    }

    pub fn frame(&mut self, kind: WireKind, payload: impl Serialize) -> WireMessage {
        let sequence = self.next;
        self.next += 1;
        WireMessage {
            kind,
            session_id: self.session_id.clone(),
            payload: serde_json::to_value(payload).expect("payloads serialize"),
            sequence,
        }
    }
}

/// Control request, sent as a stream frame or to `POST /sessions/{id}/control`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Control {
    Start,
    Pause,
    Resume,
    SteeringUpdate { update: SteeringUpdate },
    Compare {
        #[serde(default)]
        force: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
}

impl ErrorPayload {
    pub fn new(code: &str, message: impl ToString) -> Self {
        ErrorPayload { code: code.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteeringAck {
    pub version: u64,
}

/// JSON schema every SNAPSHOT payload satisfies.
pub const SNAPSHOT_SCHEMA: &str = include_str!("../schema/snapshot.schema.json");
