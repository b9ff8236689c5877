//! Scripted sessions: a spatial preset, a Chronicle file and a list of
//! prompts and signal batches, replayed against an in-process service.
//!
//! Golden comparison ignores `reasoning_trace` envelopes and every `ts` key;
//! object key order never matters because comparison is on parsed JSON.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pair_core::chronicle::load_chronicle;
use pair_core::monitor::Signal;
use pair_core::reasoner::SchemaTable;
use pair_core::scene::SpatialData;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ServiceConfig;
use crate::protocol::{strip_timestamps, Envelope, MessageType};
use crate::service::{init_envelope, Service};

/// Session id used for every scenario run, so traces are reproducible.
pub const SCENARIO_SESSION: &str = "scenario";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("session rejected the scenario: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Step {
    Prompt { prompt: String },
    Signals { signals: Vec<Signal> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spatial: SpatialData,
    /// Chronicle file, relative to the scenario file.
    pub chronicle: PathBuf,
    #[serde(default)]
    pub app_goal: Option<String>,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Vec<Envelope>>,
    #[serde(skip)]
    base: PathBuf,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn format_err(path: &Path, e: impl fmt::Display) -> ScenarioError {
    ScenarioError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let mut s: Scenario = serde_json::from_str(&read(path)?).map_err(|e| format_err(path, e))?;
        s.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn chronicle_path(&self) -> PathBuf {
        self.base.join(&self.chronicle)
    }

    /// Runs every step and returns all outbound envelopes in order. The
    /// Chronicle file is read but never written.
    pub fn run(&self, config: &ServiceConfig) -> Result<Vec<Envelope>, ScenarioError> {
        let path = self.chronicle_path();
        let graph = load_chronicle(&path).map_err(|e| format_err(&path, e))?;
        let schema = SchemaTable::for_chronicle(&path).map_err(|e| format_err(&path, e))?;
        let owner = graph.owner().to_string();

        let service = Service::with_rules(config.clone());
        service.add_chronicle(graph, Vec::<String>::new(), schema, None);
        let conn = service.connect();

        let mut trace = conn.send(init_envelope(
            SCENARIO_SESSION,
            &self.spatial,
            &owner,
            None,
            self.app_goal.as_deref(),
        ));
        if let Some(err) = trace.iter().find(|e| e.kind == MessageType::Error) {
            return Err(ScenarioError::Rejected(err.payload.to_string()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            let (kind, payload) = match step {
                Step::Prompt { prompt } => (MessageType::UserPrompt, json!({ "text": prompt })),
                Step::Signals { signals } => (MessageType::SignalBatch, json!({ "signals": signals })),
            };
            trace.extend(conn.send(Envelope::new(kind, SCENARIO_SESSION, i as u64 + 1, payload)));
        }
        Ok(trace)
    }

    /// Runs and compares with `expected` (or the scenario's own `expect`).
    pub fn check(&self, config: &ServiceConfig, expected: Option<&[Envelope]>) -> Result<Outcome, ScenarioError> {
        let start = Instant::now();
        let trace = self.run(config)?;
        let elapsed = start.elapsed();
        let verdict = expected
            .or(self.expect.as_deref())
            .map(|exp| compare(exp, &trace));
        Ok(Outcome { trace, elapsed, verdict })
    }
}

pub struct Outcome {
    pub trace: Vec<Envelope>,
    pub elapsed: Duration,
    /// `None` when there was nothing to compare against.
    pub verdict: Option<Result<(), Divergence>>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Some(Err(_)) => 1,
            _ => 0,
        }
    }
}

/// The part of a trace golden comparison looks at.
pub fn golden_view(trace: &[Envelope]) -> Vec<Value> {
    trace
        .iter()
        .filter(|e| e.kind != MessageType::ReasoningTrace)
        .map(|e| {
            let mut v = serde_json::to_value(e).expect("envelopes serialize");
            strip_timestamps(&mut v);
            v
        })
        .collect()
}

/// Every envelope, with timestamps stripped, one per line.
pub fn canonical_trace(trace: &[Envelope]) -> String {
    trace
        .iter()
        .map(|e| {
            let mut v = serde_json::to_value(e).expect("envelopes serialize");
            strip_timestamps(&mut v);
            v.to_string() + "\n"
        })
        .collect()
}

/// First point where two traces disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub index: usize,
    pub seq: Option<u64>,
    pub expected: Option<Value>,
    pub actual: Option<Value>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &Option<Value>| v.as_ref().map_or("<missing>".to_string(), |v| v.to_string());
        match self.seq {
            Some(seq) => writeln!(f, "traces diverge at envelope seq {seq} (golden index {}):", self.index)?,
            None => writeln!(f, "traces diverge at golden index {}:", self.index)?,
        }
        writeln!(f, "- expected: {}", show(&self.expected))?;
        write!(f, "+ actual:   {}", show(&self.actual))
    }
}

pub fn compare(expected: &[Envelope], actual: &[Envelope]) -> Result<(), Divergence> {
    let exp = golden_view(expected);
    let act = golden_view(actual);
    for i in 0..exp.len().max(act.len()) {
        let (e, a) = (exp.get(i), act.get(i));
        if e != a {
            let seq = a.or(e).and_then(|v| v.get("seq")).and_then(Value::as_u64);
            return Err(Divergence {
                index: i,
                seq,
                expected: e.cloned(),
                actual: a.cloned(),
            });
        }
    }
    Ok(())
}

/// Reads a trace file written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<Envelope>, ScenarioError> {
    serde_json::from_str(&read(path)?).map_err(|e| format_err(path, e))
}

pub fn write_trace(path: &Path, trace: &[Envelope]) -> Result<(), ScenarioError> {
    let text = serde_json::to_string_pretty(trace).expect("envelopes serialize");
    std::fs::write(path, text + "\n").map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(kind: MessageType, seq: u64, payload: Value) -> Envelope {
        Envelope::new(kind, "s", seq, payload)
    }

    #[test]
    fn comparison_ignores_traces_timestamps_and_key_order() {
        let a = vec![
            env(MessageType::Snapshot, 1, json!({"a": 1, "b": 2})),
            env(MessageType::ReasoningTrace, 2, json!({"x": 1})),
            env(MessageType::ChronicleUpdate, 3, json!({"ts": 5, "materialized": []})),
        ];
        let b: Vec<Envelope> = serde_json::from_str(
            r#"[{"type":"snapshot","session_id":"s","seq":1,"payload":{"b":2,"a":1}},
                {"type":"chronicle_update","session_id":"s","seq":3,"payload":{"materialized":[],"ts":99}}]"#,
        )
        .unwrap();
        assert_eq!(compare(&a, &b), Ok(()));
    }

    #[test]
    fn divergence_names_the_seq() {
        let a = vec![env(MessageType::Snapshot, 1, json!({})), env(MessageType::EventOut, 2, json!({"position": "anchor_12"}))];
        let mut b = a.clone();
        b[1].payload = json!({"position": "anchor_07"});
        let d = compare(&a, &b).unwrap_err();
        assert_eq!((d.index, d.seq), (1, Some(2)));
        assert!(d.to_string().contains("seq 2"));

        let d = compare(&a, &a[..1]).unwrap_err();
        assert_eq!(d.actual, None);
        assert_eq!(d.seq, Some(2));
    }

    #[test]
    fn steps_are_untagged() {
        let steps: Vec<Step> = serde_json::from_str(
            r#"[{"prompt": "hi"}, {"signals": [{"kind": "gaze_target", "value": "x", "t": 0.0}]}]"#,
        )
        .unwrap();
        assert!(matches!(steps[0], Step::Prompt { .. }));
        assert!(matches!(&steps[1], Step::Signals { signals } if signals.len() == 1));
        assert!(serde_json::from_str::<Step>(r#"{"wait": 1}"#).is_err());
    }
}
