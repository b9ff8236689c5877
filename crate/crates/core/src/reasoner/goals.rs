//! Thematic and temporal reasoning: emotional goals and time-ordered recall.

use serde::Serialize;

use super::{ReasoningError, SchemaTable};
use crate::chronicle::{ChronicleGraph, ChronicleNode, Literal};
use crate::embedding::semantic_similarity;
use crate::scribe::SituationGraph;

pub const RETRIEVE_MEMORY: &str = "retrieve_memory";

/// Words describing memories that address a possible cause.
pub fn theme_for_cause(cause: &str) -> Option<&'static str> {
    match cause {
        "missing_someone" => Some("friend friends best friend companion family together"),
        _ => None,
    }
}

fn goal_name(app_goal: &str) -> String {
    match app_goal {
        "happy" => "increase_happiness".to_string(),
        other => format!("reach_{other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalIntent {
    pub goal: String,
    /// Sentiment every candidate memory must carry.
    pub sentiment: String,
    /// Context of the chosen memory; `None` when no candidate exists.
    pub context: Option<String>,
    /// Candidate memory ids, best first.
    pub candidates: Vec<String>,
    /// Theme used for ranking, when a cause was known.
    pub theme: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmotionalGoal {
    NoOp { emotion: String },
    RetrieveMemory(RetrievalIntent),
}

/// Compares the situation's primary emotion with the application goal. When
/// they differ, picks positive memories ranked by thematic similarity to the
/// possible cause, then recency, then id.
pub fn select_emotional_goal(
    situation: &SituationGraph,
    app_goal: &str,
    graph: &ChronicleGraph,
) -> Result<EmotionalGoal, ReasoningError> {
    let emotion = situation
        .first("has_emotion")
        .ok_or(ReasoningError::MissingEmotion)?;
    if emotion == app_goal {
        return Ok(EmotionalGoal::NoOp {
            emotion: emotion.to_string(),
        });
    }

    let sentiment = "positive";
    let theme = situation.first("has_possible_cause").and_then(theme_for_cause);
    let context_of = |n: &ChronicleNode| n.properties.get("context").and_then(Literal::as_str).map(str::to_string);

    let mut scored: Vec<(f64, i64, &str, String)> = graph
        .nodes_with_label("Memory")
        .filter(|n| n.properties.get("sentiment") == Some(&Literal::from(sentiment)))
        .filter_map(|n| {
            let ctx = context_of(n)?;
            let sim = theme.map_or(0.0, |t| semantic_similarity(t, &ctx).value());
            Some((sim, n.timestamp.unwrap_or(i64::MIN), n.id.as_str(), ctx))
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| b.1.cmp(&a.1))
            .then_with(|| a.2.cmp(b.2))
    });

    Ok(EmotionalGoal::RetrieveMemory(RetrievalIntent {
        goal: goal_name(app_goal),
        sentiment: sentiment.to_string(),
        context: scored.first().map(|s| s.3.clone()),
        candidates: scored.iter().map(|s| s.2.to_string()).collect(),
        theme: theme.map(str::to_string),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalOrder {
    Ascending,
    Descending,
}

/// Ids of timestamped `label` nodes inside the inclusive `window`, sorted by
/// timestamp (then id) in `order`. Nodes without a timestamp are skipped.
pub fn query_temporal(
    graph: &ChronicleGraph,
    schema: &SchemaTable,
    label: &str,
    order: TemporalOrder,
    window: Option<(i64, i64)>,
) -> Result<Vec<String>, ReasoningError> {
    if !schema.has_label(label) {
        return Err(ReasoningError::UnknownLabel(label.to_string()));
    }
    let mut hits: Vec<(i64, &str)> = graph
        .nodes_with_label(label)
        .filter_map(|n| n.timestamp.map(|t| (t, n.id.as_str())))
        .filter(|(t, _)| window.is_none_or(|(lo, hi)| lo <= *t && *t <= hi))
        .collect();
    hits.sort();
    if order == TemporalOrder::Descending {
        // newest first; equal timestamps still in id order
        hits.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    }
    Ok(hits.into_iter().map(|(_, id)| id.to_string()).collect())
}
