//! User-state monitoring: symbolic signals in, detected states, attention
//! triples and proposed Chronicle updates out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chronicle::Triple;

pub const DEFAULT_DWELL_THRESHOLD: f64 = 2.0;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.8;
pub const HEART_RATE_RANGE: (f64, f64) = (20.0, 250.0);

/// Gaze target value meaning "looking at nothing".
pub const NO_TARGET: &str = "none";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MonitorError {
    #[error("signal {index}: timestamp {t} goes backwards (previous {previous})")]
    NonMonotonic { index: usize, t: f64, previous: f64 },
    #[error("signal {index}: timestamp must be finite")]
    BadTimestamp { index: usize },
    #[error("signal {index}: heart rate {value} outside (20, 250) bpm")]
    HeartRateOutOfRange { index: usize, value: f64 },
    #[error("signal {index}: {kind} expects a {expected} value")]
    WrongValueType {
        index: usize,
        kind: SignalKind,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    GazeTarget,
    GazeDirection,
    FacialExpression,
    HeartRate,
}

impl SignalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::GazeTarget => "gaze_target",
            SignalKind::GazeDirection => "gaze_direction",
            SignalKind::FacialExpression => "facial_expression",
            SignalKind::HeartRate => "heart_rate",
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalValue {
    Num(f64),
    Text(String),
}

impl SignalValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            SignalValue::Text(s) => Some(s),
            SignalValue::Num(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signal {
    pub kind: SignalKind,
    pub value: SignalValue,
    /// Seconds.
    pub t: f64,
}

impl Signal {
    pub fn text(kind: SignalKind, value: impl Into<String>, t: f64) -> Self {
        Signal {
            kind,
            value: SignalValue::Text(value.into()),
            t,
        }
    }

    pub fn heart_rate(bpm: f64, t: f64) -> Self {
        Signal {
            kind: SignalKind::HeartRate,
            value: SignalValue::Num(bpm),
            t,
        }
    }

    fn is(&self, kind: SignalKind, value: &str) -> bool {
        self.kind == kind && self.value.as_str() == Some(value)
    }
}

/// Checks timestamps are finite and non-decreasing, heart rates are in range,
/// and the remaining kinds carry text values.
pub fn validate_batch(signals: &[Signal]) -> Result<(), MonitorError> {
    let mut previous: Option<f64> = None;
    for (index, s) in signals.iter().enumerate() {
        if !s.t.is_finite() {
            return Err(MonitorError::BadTimestamp { index });
        }
        if let Some(p) = previous {
            if s.t < p {
                return Err(MonitorError::NonMonotonic {
                    index,
                    t: s.t,
                    previous: p,
                });
            }
        }
        previous = Some(s.t);
        match (&s.kind, &s.value) {
            (SignalKind::HeartRate, SignalValue::Num(v)) => {
                let (lo, hi) = HEART_RATE_RANGE;
                if !(*v > lo && *v < hi) {
                    return Err(MonitorError::HeartRateOutOfRange { index, value: *v });
                }
            }
            (SignalKind::HeartRate, SignalValue::Text(_)) => {
                return Err(MonitorError::WrongValueType {
                    index,
                    kind: s.kind,
                    expected: "numeric",
                })
            }
            (_, SignalValue::Num(_)) => {
                return Err(MonitorError::WrongValueType {
                    index,
                    kind: s.kind,
                    expected: "string",
                })
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectedState {
    pub label: String,
    pub confidence: f64,
    pub evidence: Vec<SignalKind>,
}

impl DetectedState {
    pub fn new(label: impl Into<String>, confidence: f64, evidence: Vec<SignalKind>) -> Self {
        DetectedState {
            label: label.into(),
            confidence: confidence.clamp(0.0, 1.0),
            evidence,
        }
    }
}

/// Per-target gaze time within one batch. Time between consecutive signals is
/// credited to whatever target was active at the earlier one.
fn batch_dwell(signals: &[Signal]) -> BTreeMap<String, f64> {
    let mut dwell = BTreeMap::new();
    let mut current: Option<&str> = None;
    let mut last_t: Option<f64> = None;
    for s in signals {
        if let (Some(target), Some(last)) = (current, last_t) {
            *dwell.entry(target.to_string()).or_insert(0.0) += (s.t - last).max(0.0);
        }
        last_t = Some(s.t);
        if s.kind == SignalKind::GazeTarget {
            current = s.value.as_str().filter(|v| *v != NO_TARGET);
        }
    }
    dwell
}

/// Rule-table classifier. Stateless; rules fire in table order.
pub fn detect(signals: &[Signal], dwell_threshold: f64) -> Vec<DetectedState> {
    let any = |kind, value| signals.iter().any(|s| s.is(kind, value));
    let mut states = Vec::new();
    if any(SignalKind::FacialExpression, "low_brows") && any(SignalKind::GazeDirection, "downward") {
        states.push(DetectedState::new(
            "sad",
            0.9,
            vec![SignalKind::FacialExpression, SignalKind::GazeDirection],
        ));
    }
    if any(SignalKind::FacialExpression, "smile") {
        states.push(DetectedState::new("happy", 0.9, vec![SignalKind::FacialExpression]));
    }
    if batch_dwell(signals).values().any(|d| *d >= dwell_threshold) {
        states.push(DetectedState::new("curious", 0.7, vec![SignalKind::GazeTarget]));
    }
    states
}

fn user_triple(predicate: &str, object: &str) -> Triple {
    Triple::new("user", predicate, object).expect("fixed predicate names are valid")
}

/// Accumulates gaze dwell across batches and reports threshold crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTracker {
    durations: BTreeMap<String, f64>,
    dwell_threshold: f64,
    current: Option<String>,
    last_t: Option<f64>,
    crossed: BTreeSet<String>,
}

impl Default for AttentionTracker {
    fn default() -> Self {
        AttentionTracker::new(DEFAULT_DWELL_THRESHOLD)
    }
}

impl AttentionTracker {
    pub fn new(dwell_threshold: f64) -> Self {
        AttentionTracker {
            durations: BTreeMap::new(),
            dwell_threshold,
            current: None,
            last_t: None,
            crossed: BTreeSet::new(),
        }
    }

    pub fn dwell_threshold(&self) -> f64 {
        self.dwell_threshold
    }

    pub fn duration(&self, id: &str) -> f64 {
        self.durations.get(id).copied().unwrap_or(0.0)
    }

    pub fn durations(&self) -> &BTreeMap<String, f64> {
        &self.durations
    }

    pub fn current_target(&self) -> Option<&str> {
        self.current.as_deref()
    }

    /// Emits `<user, has_attention_on, id>` the first time `id` crosses the
    /// dwell threshold, and one `<user, has_emotion, curious>` right after the
    /// first crossing of the batch.
    pub fn track(&mut self, signals: &[Signal]) -> Vec<Triple> {
        let mut out = Vec::new();
        let mut curious = false;
        for s in signals {
            if let (Some(target), Some(last)) = (&self.current, self.last_t) {
                let total = self.durations.entry(target.clone()).or_insert(0.0);
                *total += (s.t - last).max(0.0);
                if *total >= self.dwell_threshold && self.crossed.insert(target.clone()) {
                    out.push(user_triple("has_attention_on", target));
                    if !curious {
                        out.push(user_triple("has_emotion", "curious"));
                        curious = true;
                    }
                }
            }
            self.last_t = Some(self.last_t.map_or(s.t, |l| l.max(s.t)));
            if s.kind == SignalKind::GazeTarget {
                self.current = s
                    .value
                    .as_str()
                    .filter(|v| *v != NO_TARGET && !v.is_empty())
                    .map(str::to_string);
            }
        }
        out
    }
}

/// `<user, has_emotion, label>` for each state at or above `min_confidence`,
/// by descending confidence then label.
pub fn propose_update(states: &[DetectedState], min_confidence: f64) -> Vec<Triple> {
    let mut kept: Vec<&DetectedState> = states
        .iter()
        .filter(|s| s.confidence >= min_confidence)
        .collect();
    kept.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.label.cmp(&b.label))
    });
    let mut seen = BTreeSet::new();
    kept.into_iter()
        .filter(|s| seen.insert(s.label.as_str()))
        .filter_map(|s| Triple::new("user", "has_emotion", s.label.as_str()).ok())
        .collect()
}
