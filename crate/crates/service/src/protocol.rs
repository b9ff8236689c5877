//! Wire envelopes exchanged between clients and the service, one JSON object
//! per line.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    InitSpatialData,
    UserPrompt,
    SignalBatch,
    EventOut,
    ChronicleUpdate,
    SnapshotRequest,
    Snapshot,
    ReasoningTrace,
    Error,
}

impl MessageType {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::InitSpatialData => "init_spatial_data",
            MessageType::UserPrompt => "user_prompt",
            MessageType::SignalBatch => "signal_batch",
            MessageType::EventOut => "event_out",
            MessageType::ChronicleUpdate => "chronicle_update",
            MessageType::SnapshotRequest => "snapshot_request",
            MessageType::Snapshot => "snapshot",
            MessageType::ReasoningTrace => "reasoning_trace",
            MessageType::Error => "error",
        }
    }

    /// Whether clients may send this type.
    pub fn is_inbound(self) -> bool {
        matches!(
            self,
            MessageType::InitSpatialData
                | MessageType::UserPrompt
                | MessageType::SignalBatch
                | MessageType::SnapshotRequest
        )
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: MessageType,
    #[serde(default)]
    pub session_id: String,
    #[serde(default)]
    pub seq: u64,
    #[serde(default)]
    pub payload: Value,
}

impl Envelope {
    pub fn new(kind: MessageType, session_id: impl Into<String>, seq: u64, payload: Value) -> Self {
        Envelope {
            kind,
            session_id: session_id.into(),
            seq,
            payload,
        }
    }

    pub fn error(session_id: impl Into<String>, seq: u64, stage: &str, message: impl fmt::Display) -> Self {
        Envelope::new(
            MessageType::Error,
            session_id,
            seq,
            json!({ "stage": stage, "message": message.to_string() }),
        )
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelopes always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Removes every `"ts"` key, at any depth.
pub fn strip_timestamps(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.remove("ts");
            map.values_mut().for_each(strip_timestamps);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timestamps),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_wire_form() {
        let e = Envelope::new(MessageType::UserPrompt, "s1", 3, json!({"text": "hi"}));
        let line = e.to_line();
        assert_eq!(line, r#"{"type":"user_prompt","session_id":"s1","seq":3,"payload":{"text":"hi"}}"#);
        assert_eq!(Envelope::from_line(&line).unwrap(), e);
    }

    #[test]
    fn rejects_unknown_types_and_fields() {
        assert!(Envelope::from_line(r#"{"type":"hello","session_id":"","seq":0,"payload":{}}"#).is_err());
        assert!(Envelope::from_line(r#"{"type":"snapshot_request","extra":1}"#).is_err());
        let minimal = Envelope::from_line(r#"{"type":"snapshot_request"}"#).unwrap();
        assert_eq!(minimal.session_id, "");
    }

    #[test]
    fn inbound_types() {
        assert!(MessageType::UserPrompt.is_inbound());
        assert!(!MessageType::EventOut.is_inbound());
        let all: Vec<MessageType> = serde_json::from_str(
            r#"["init_spatial_data","user_prompt","signal_batch","event_out","chronicle_update",
                "snapshot_request","snapshot","reasoning_trace","error"]"#,
        )
        .unwrap();
        for t in all {
            assert_eq!(serde_json::to_value(t).unwrap(), json!(t.as_str()));
        }
    }

    #[test]
    fn strip_nested_timestamps() {
        let mut v = json!({"ts": 1, "a": [{"ts": 2, "b": 3}], "c": {"ts": 4}});
        strip_timestamps(&mut v);
        assert_eq!(v, json!({"a": [{"b": 3}], "c": {}}));
    }
}
