#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pair_service::protocol::{Envelope, MessageType};
use pair_service::scenario::{golden_view, Scenario, Step};
use pair_service::service::{init_envelope, Connection};
use serde_json::{json, Value};

pub fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn financial() -> Scenario {
    Scenario::load(&scenarios_dir().join("financial_helper.json")).unwrap()
}

pub fn desk() -> Scenario {
    Scenario::load(&scenarios_dir().join("desk_environment.json")).unwrap()
}

/// Copies the scenario Chronicles (with consent file) into a fresh directory.
pub fn pool_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(scenarios_dir().join("chronicles")).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    dir
}

/// Drives a scenario's steps over an existing connection as `session_id`.
pub fn drive(conn: &Connection, scenario: &Scenario, session_id: &str, owner: &str, requester: Option<&str>) -> Vec<Envelope> {
    let mut out = conn.send(init_envelope(session_id, &scenario.spatial, owner, requester, scenario.app_goal.as_deref()));
    for (i, step) in scenario.steps.iter().enumerate() {
        let (kind, payload) = match step {
            Step::Prompt { prompt } => (MessageType::UserPrompt, json!({ "text": prompt })),
            Step::Signals { signals } => (MessageType::SignalBatch, json!({ "signals": signals })),
        };
        out.extend(conn.send(Envelope::new(kind, session_id, i as u64 + 1, payload)));
    }
    out
}

/// Golden view with session ids blanked, for comparing runs across sessions.
pub fn anonymous(trace: &[Envelope]) -> Vec<Value> {
    golden_view(trace)
        .into_iter()
        .map(|mut v| {
            v["session_id"] = json!("");
            v
        })
        .collect()
}

pub fn prompt(session_id: &str, text: &str) -> Envelope {
    Envelope::new(MessageType::UserPrompt, session_id, 0, json!({ "text": text }))
}

pub fn signals(session_id: &str, signals: Value) -> Envelope {
    Envelope::new(MessageType::SignalBatch, session_id, 0, json!({ "signals": signals }))
}

pub fn kinds(out: &[Envelope]) -> Vec<MessageType> {
    out.iter().map(|e| e.kind).collect()
}
