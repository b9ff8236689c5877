//! Translation between natural language / detected user states and symbolic
//! structures: requests become situation graphs, media objects become
//! runtime events.

mod external;
mod rules;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chronicle::Triple;
use crate::monitor::{DetectedState, SignalKind};
use crate::scene::{Interaction, RuntimeEvent, SpatialData, INSTANTIATE_VISUALIZATION};
use crate::synthesizer::{MediaObject, MediaPayload};

pub use external::{ExternalTranslator, Exchange};
pub use rules::{parse_user_request, RuleBasedTranslator, DEFAULT_ENTITY};

/// Predicates a situation graph may use.
pub const SITUATION_VOCABULARY: [&str; 10] = [
    "has_participant",
    "has_intent",
    "has_target_entity",
    "has_target_location",
    "has_emotion",
    "has_possible_cause",
    "has_activity",
    "has_location",
    "has_time",
    "has_ambience",
];

pub const UNKNOWN_INTENT: &str = "unknown";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScribeError {
    #[error("situation graph needs at least one triple")]
    EmptySituation,
    #[error("predicate `{0}` is outside the situation vocabulary")]
    UnknownPredicate(String),
    #[error("triple subject `{subject}` is neither `{situation}` nor `user`")]
    ForeignSubject { subject: String, situation: String },
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("no detected states to interpret")]
    NoStates,
    #[error("render target anchor is empty")]
    EmptyAnchor,
    #[error("rendered event is malformed: {0}")]
    MalformedEvent(String),
    #[error("translator backend failed: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSituation")]
pub struct SituationGraph {
    situation_id: String,
    triples: Vec<Triple>,
}

#[derive(Deserialize)]
struct RawSituation {
    situation_id: String,
    triples: Vec<Triple>,
}

impl TryFrom<RawSituation> for SituationGraph {
    type Error = ScribeError;

    fn try_from(raw: RawSituation) -> Result<Self, ScribeError> {
        SituationGraph::new(raw.situation_id, raw.triples)
    }
}

impl SituationGraph {
    pub fn new(situation_id: impl Into<String>, triples: Vec<Triple>) -> Result<Self, ScribeError> {
        let graph = SituationGraph {
            situation_id: situation_id.into(),
            triples,
        };
        graph.validate()?;
        Ok(graph)
    }

    /// Convenience for `(situation, predicate, object)` rows.
    pub fn from_rows(situation_id: &str, rows: &[(&str, &str)]) -> Result<Self, ScribeError> {
        let triples = rows
            .iter()
            .map(|(p, o)| {
                Triple::new(situation_id, *p, *o).map_err(|e| ScribeError::InvalidTriple(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        SituationGraph::new(situation_id, triples)
    }

    pub fn validate(&self) -> Result<(), ScribeError> {
        if self.triples.is_empty() {
            return Err(ScribeError::EmptySituation);
        }
        for t in &self.triples {
            if !SITUATION_VOCABULARY.contains(&t.predicate()) {
                return Err(ScribeError::UnknownPredicate(t.predicate().to_string()));
            }
            if t.subject() != self.situation_id && t.subject() != "user" {
                return Err(ScribeError::ForeignSubject {
                    subject: t.subject().to_string(),
                    situation: self.situation_id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn situation_id(&self) -> &str {
        &self.situation_id
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Objects of all triples with `predicate`, in graph order.
    pub fn objects<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.triples
            .iter()
            .filter(move |t| t.predicate() == predicate)
            .map(Triple::object)
    }

    pub fn first(&self, predicate: &str) -> Option<&str> {
        self.triples
            .iter()
            .find(|t| t.predicate() == predicate)
            .map(Triple::object)
    }

    /// All triple elements joined with spaces, used for embedding.
    pub fn text(&self) -> String {
        self.triples
            .iter()
            .map(|t| format!("{} {} {}", t.subject(), t.predicate(), t.object()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Everything a backend needs to parse one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseRequest {
    pub situation_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<SituationGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialData>,
}

impl ParseRequest {
    pub fn new(situation_id: impl Into<String>, text: impl Into<String>) -> Self {
        ParseRequest {
            situation_id: situation_id.into(),
            text: text.into(),
            context: None,
            spatial: None,
        }
    }

    pub fn with_spatial(mut self, spatial: SpatialData) -> Self {
        self.spatial = Some(spatial);
        self
    }

    pub fn with_context(mut self, context: SituationGraph) -> Self {
        self.context = Some(context);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    RuleBased,
    External,
}

/// Seam between the pipeline and whatever performs the translation.
pub trait TranslatorBackend: Send + Sync {
    fn capability(&self) -> Capability;
    fn parse(&self, request: &ParseRequest) -> Result<SituationGraph, ScribeError>;
    fn render(&self, media: &MediaObject, anchor: &str) -> Result<RuntimeEvent, ScribeError>;
}

fn json_amount(amount: f64) -> Value {
    if amount.fract() == 0.0 && amount.abs() < 9.0e15 {
        json!(amount as i64)
    } else {
        json!(amount)
    }
}

/// Turns a media object into the event that places it on `anchor`.
pub fn render_xr_script(media: &MediaObject, anchor: &str) -> Result<RuntimeEvent, ScribeError> {
    if anchor.is_empty() {
        return Err(ScribeError::EmptyAnchor);
    }
    let data = match &media.payload {
        MediaPayload::PieChart { slices } => slices
            .iter()
            .map(|s| json!({"category": s.category, "amount": json_amount(s.amount)}))
            .collect(),
        MediaPayload::PhotoFrame {
            image,
            frame_color,
            emotional_tag,
        } => vec![json!({
            "image": image,
            "frame_color": frame_color,
            "emotional_tag": emotional_tag,
        })],
        MediaPayload::TextPanel { text } => vec![json!({ "text": text })],
    };
    let event = RuntimeEvent {
        event: INSTANTIATE_VISUALIZATION.to_string(),
        visualization_type: media.kind().as_str().to_string(),
        data,
        position: anchor.to_string(),
        interaction: Interaction::Enabled,
    };
    event
        .validate_shape()
        .map_err(|e| ScribeError::MalformedEvent(e.to_string()))?;
    Ok(event)
}

/// Lifts detected states into a situation. The only cause rule: sadness
/// observed together with a downward gaze suggests `missing_someone`.
pub fn interpret_signals(
    situation_id: &str,
    states: &[DetectedState],
) -> Result<SituationGraph, ScribeError> {
    if states.is_empty() {
        return Err(ScribeError::NoStates);
    }
    let mut ordered: Vec<&DetectedState> = states.iter().collect();
    ordered.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.label.cmp(&b.label))
    });

    let mut rows = vec![("has_participant", "user")];
    let mut seen = BTreeSet::new();
    for s in &ordered {
        if seen.insert(s.label.as_str()) {
            rows.push(("has_emotion", s.label.as_str()));
        }
    }
    let sad_downward = ordered
        .iter()
        .any(|s| s.label == "sad" && s.evidence.contains(&SignalKind::GazeDirection));
    if sad_downward {
        rows.push(("has_possible_cause", "missing_someone"));
    }
    SituationGraph::from_rows(situation_id, &rows)
}
