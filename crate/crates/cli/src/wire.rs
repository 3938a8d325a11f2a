//! JSON shapes exchanged with slate clients.
//!
//! Every WebSocket message is one event:
//!
//! ```json
//! {"schema_version": 1, "session_id": "default", "seq": 7, "t_ms": 5012,
//!  "event": "response", "text": "...", "poem": "...", "mode": "ideate", "length_warning": false}
//! ```
//!
//! `seq` counts from 1 per session with no gaps; `t_ms` is milliseconds
//! since the session started.

use poetslate_core::formats::Frame;
use poetslate_core::{Marker, Mode, Pose};
use serde::{Deserialize, Serialize};

pub const WIRE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub schema_version: u32,
    pub session_id: String,
    pub seq: u64,
    pub t_ms: u64,
    #[serde(flatten)]
    pub event: EventKind,
}

impl WireEvent {
    pub fn is_response(&self) -> bool {
        matches!(self.event, EventKind::Response { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    SnapshotAccepted {
        preview: Vec<String>,
        lines: Vec<Vec<String>>,
        mode: Mode,
    },
    SettleCountdown {
        remaining_ms: u64,
    },
    Submission {
        poem: String,
        mode: Mode,
    },
    ChainStarted {
        mode: Mode,
    },
    Response {
        text: String,
        poem: String,
        mode: Mode,
        length_warning: bool,
    },
    Error {
        code: String,
        message: String,
    },
}

/// `POST /snapshot` body: either ideal tile poses or raw detections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<Vec<Pose>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<Marker>>,
    #[serde(default)]
    pub frame: Frame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotAck {
    pub preview: Vec<String>,
    pub lines: Vec<Vec<String>>,
    pub mode: Mode,
    pub changed: bool,
    pub settle_remaining_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseView {
    pub text: String,
    pub poem: String,
    pub mode: Mode,
    pub length_warning: bool,
    pub seq: u64,
}

/// `GET /state`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub schema_version: u32,
    pub session_id: String,
    pub t_ms: u64,
    pub mode: Mode,
    /// The latest displayed response; null until the first chain completes.
    pub response: Option<ResponseView>,
    pub preview: Vec<String>,
    pub lines: Vec<Vec<String>>,
    pub settle_remaining_ms: Option<u64>,
    pub in_flight: bool,
    pub closed: bool,
    pub last_seq: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
}
