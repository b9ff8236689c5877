//! Turns query results and Chronicle content into media objects, either by
//! retrieving existing content or by generating a payload conditioned on
//! Chronicle nodes.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::chronicle::{ChronicleGraph, Literal, QueryResult};

/// Tolerance on the sum of pie proportions.
pub const PROPORTION_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_FRAME_COLOR: &str = "neutral_gray";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error("no rows to synthesize from")]
    NoRows,
    #[error("spending total is zero; proportions are undefined")]
    DegenerateTotal,
    #[error("invalid spending amount {0} (must be finite and non-negative)")]
    InvalidAmount(f64),
    #[error("row is missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row} column `{column}` has the wrong type")]
    WrongType { row: usize, column: String },
    #[error("memory sentiment `{0}` suppresses retrieval")]
    SuppressedSentiment(String),
    #[error("empty image reference")]
    EmptyImage,
    #[error("generation needs at least one conditioning node")]
    EmptyCondition,
    #[error("unknown conditioning node `{0}`")]
    UnknownNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Retrieved,
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    PieChart,
    PhotoFrame,
    TextPanel,
}

impl MediaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::PieChart => "pie_chart",
            MediaKind::PhotoFrame => "photo_frame",
            MediaKind::TextPanel => "text_panel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpendingRecord {
    pub category: String,
    pub amount: f64,
    /// Chronicle node the record was read from, when known.
    pub source: Option<String>,
}

impl SpendingRecord {
    pub fn new(category: impl Into<String>, amount: f64) -> Result<Self, SynthesisError> {
        if !amount.is_finite() || amount < 0.0 {
            return Err(SynthesisError::InvalidAmount(amount));
        }
        Ok(SpendingRecord {
            category: category.into(),
            amount,
            source: None,
        })
    }

    /// Reads `(category, amount)` rows; the source is the row's terminal node.
    pub fn from_result(result: &QueryResult) -> Result<Vec<Self>, SynthesisError> {
        let cat = result
            .column("category")
            .ok_or_else(|| SynthesisError::MissingColumn("category".into()))?;
        let amt = result
            .column("amount")
            .ok_or_else(|| SynthesisError::MissingColumn("amount".into()))?;
        result
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let category = row.values[cat].as_str().ok_or(SynthesisError::WrongType {
                    row: i,
                    column: "category".into(),
                })?;
                let amount = row.values[amt].as_f64().ok_or(SynthesisError::WrongType {
                    row: i,
                    column: "amount".into(),
                })?;
                let mut rec = SpendingRecord::new(category, amount)?;
                rec.source = row.nodes.last().cloned();
                Ok(rec)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PieSlice {
    pub category: String,
    pub amount: f64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MediaPayload {
    PieChart {
        slices: Vec<PieSlice>,
    },
    PhotoFrame {
        image: String,
        frame_color: String,
        emotional_tag: String,
    },
    TextPanel {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediaObject {
    pub payload: MediaPayload,
    pub provenance: Provenance,
    pub source_refs: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl MediaObject {
    pub fn kind(&self) -> MediaKind {
        match self.payload {
            MediaPayload::PieChart { .. } => MediaKind::PieChart,
            MediaPayload::PhotoFrame { .. } => MediaKind::PhotoFrame,
            MediaPayload::TextPanel { .. } => MediaKind::TextPanel,
        }
    }
}

/// `proportion_j = amount_j / sum_k amount_k`, categories kept in input order.
pub fn synthesize_pie(records: &[SpendingRecord]) -> Result<MediaObject, SynthesisError> {
    if records.is_empty() {
        return Err(SynthesisError::NoRows);
    }
    if let Some(bad) = records.iter().find(|r| !r.amount.is_finite() || r.amount < 0.0) {
        return Err(SynthesisError::InvalidAmount(bad.amount));
    }
    let total: f64 = records.iter().map(|r| r.amount).sum();
    if total == 0.0 {
        return Err(SynthesisError::DegenerateTotal);
    }
    let slices = records
        .iter()
        .map(|r| PieSlice {
            category: r.category.clone(),
            amount: r.amount,
            proportion: r.amount / total,
        })
        .collect();
    Ok(MediaObject {
        payload: MediaPayload::PieChart { slices },
        provenance: Provenance::Generated,
        source_refs: records.iter().filter_map(|r| r.source.clone()).collect(),
        warnings: Vec::new(),
    })
}

/// Sentiment to emotional tag. `None` means retrieval is suppressed.
pub fn emotional_tag(sentiment: &str) -> Option<&'static str> {
    match sentiment {
        "positive" => Some("nostalgia"),
        "neutral" => Some("calm"),
        _ => None,
    }
}

/// The owner's favorite color, from a `Preference` node with
/// `category = "favorite_color"`.
pub fn favorite_color(graph: &ChronicleGraph) -> Option<String> {
    graph
        .nodes_with_label("Preference")
        .find(|n| n.properties.get("category") == Some(&Literal::from("favorite_color")))
        .and_then(|n| n.properties.get("value"))
        .and_then(|v| v.as_str().map(str::to_string))
}

/// Builds a photo frame from the first row of a memory query (rows are already
/// in deterministic order). Frame color comes from the owner's preferences.
pub fn synthesize_retrieval(
    result: &QueryResult,
    preferences: &ChronicleGraph,
) -> Result<MediaObject, SynthesisError> {
    let row = result.rows.first().ok_or(SynthesisError::NoRows)?;
    let image_col = result
        .column("image")
        .ok_or_else(|| SynthesisError::MissingColumn("image".into()))?;
    let image = row.values[image_col]
        .as_str()
        .ok_or(SynthesisError::WrongType {
            row: 0,
            column: "image".into(),
        })?
        .to_string();
    if image.is_empty() {
        return Err(SynthesisError::EmptyImage);
    }

    let sentiment = match result.column("sentiment") {
        Some(col) => row.values[col]
            .as_str()
            .ok_or(SynthesisError::WrongType {
                row: 0,
                column: "sentiment".into(),
            })?
            .to_string(),
        None => "neutral".to_string(),
    };
    let tag = emotional_tag(&sentiment)
        .ok_or_else(|| SynthesisError::SuppressedSentiment(sentiment.clone()))?;

    let mut warnings = Vec::new();
    let frame_color = favorite_color(preferences).unwrap_or_else(|| {
        warnings.push("no favorite_color preference; using default frame color".to_string());
        DEFAULT_FRAME_COLOR.to_string()
    });

    Ok(MediaObject {
        payload: MediaPayload::PhotoFrame {
            image,
            frame_color,
            emotional_tag: tag.to_string(),
        },
        provenance: Provenance::Retrieved,
        source_refs: row.nodes.last().cloned().into_iter().collect(),
        warnings,
    })
}

/// Deterministic text panel conditioned on Chronicle nodes, standing in for
/// generative media.
pub fn synthesize_generated(
    graph: &ChronicleGraph,
    condition: &[String],
    intent: &str,
) -> Result<MediaObject, SynthesisError> {
    if condition.is_empty() {
        return Err(SynthesisError::EmptyCondition);
    }
    let ids: BTreeSet<String> = condition.iter().cloned().collect();
    let mut lines = Vec::with_capacity(ids.len());
    for id in &ids {
        let node = graph
            .node(id)
            .ok_or_else(|| SynthesisError::UnknownNode(id.clone()))?;
        let labels: Vec<&str> = node.labels.iter().map(String::as_str).collect();
        let props: Vec<String> = node
            .properties
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect();
        lines.push(format!("{} {}: {}", labels.join("/"), node.id, props.join("; ")));
    }
    let text = format!("{intent}\n{}", lines.join("\n"));
    Ok(MediaObject {
        payload: MediaPayload::TextPanel { text },
        provenance: Provenance::Generated,
        source_refs: ids,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chronicle::{ChronicleNode, QueryRow};
    use proptest::prelude::*;

    fn rec(c: &str, a: f64) -> SpendingRecord {
        SpendingRecord::new(c, a).unwrap()
    }

    fn proportions(m: &MediaObject) -> Vec<f64> {
        match &m.payload {
            MediaPayload::PieChart { slices } => slices.iter().map(|s| s.proportion).collect(),
            _ => panic!("not a pie"),
        }
    }

    #[test]
    fn paper_spending_proportions() {
        let pie = synthesize_pie(&[rec("Dining", 320.0), rec("Travel", 210.0), rec("Groceries", 400.0)])
            .unwrap();
        let p = proportions(&pie);
        // 320/930, 210/930, 400/930
        let expected = [0.344_086_021_505_376_3, 0.225_806_451_612_903_22, 0.430_107_526_881_720_4];
        for (got, want) in p.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < PROPORTION_TOLERANCE);
        assert_eq!(pie.provenance, Provenance::Generated);
        match &pie.payload {
            MediaPayload::PieChart { slices } => {
                let cats: Vec<_> = slices.iter().map(|s| s.category.as_str()).collect();
                assert_eq!(cats, vec!["Dining", "Travel", "Groceries"]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_category_is_whole_pie() {
        assert_eq!(proportions(&synthesize_pie(&[rec("X", 10.0)]).unwrap()), vec![1.0]);
    }

    #[test]
    fn zero_total_is_degenerate() {
        assert_eq!(
            synthesize_pie(&[rec("A", 0.0), rec("B", 0.0)]).unwrap_err(),
            SynthesisError::DegenerateTotal
        );
        assert_eq!(synthesize_pie(&[]).unwrap_err(), SynthesisError::NoRows);
    }

    #[test]
    fn negative_amounts_rejected() {
        assert!(SpendingRecord::new("A", -1.0).is_err());
        assert!(SpendingRecord::new("A", f64::NAN).is_err());
    }

    fn memory_result(rows: &[(&str, &str, &str)]) -> QueryResult {
        QueryResult {
            columns: vec!["m.image".into(), "m.location".into(), "m.sentiment".into()],
            rows: rows
                .iter()
                .map(|(id, image, sentiment)| QueryRow {
                    nodes: vec!["user_123".into(), id.to_string()],
                    values: vec![
                        Literal::from(*image),
                        Literal::from("Berlin"),
                        Literal::from(*sentiment),
                    ],
                })
                .collect(),
        }
    }

    fn prefs(color: Option<&str>) -> ChronicleGraph {
        let mut g = ChronicleGraph::new("user_123");
        g.add_node(ChronicleNode::new("user_123", ["User"])).unwrap();
        if let Some(c) = color {
            g.add_node(
                ChronicleNode::new("pref_color", ["Preference"])
                    .with_property("category", "favorite_color")
                    .with_property("value", c),
            )
            .unwrap();
        }
        g
    }

    #[test]
    fn retrieval_uses_favorite_color() {
        let m = synthesize_retrieval(
            &memory_result(&[("m1", "user_best_friend_berlin_trip.jpg", "positive")]),
            &prefs(Some("light_blue")),
        )
        .unwrap();
        assert_eq!(
            m.payload,
            MediaPayload::PhotoFrame {
                image: "user_best_friend_berlin_trip.jpg".into(),
                frame_color: "light_blue".into(),
                emotional_tag: "nostalgia".into(),
            }
        );
        assert_eq!(m.provenance, Provenance::Retrieved);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn retrieval_without_preference_defaults_and_warns() {
        let m = synthesize_retrieval(
            &memory_result(&[("m1", "a.jpg", "positive")]),
            &prefs(None),
        )
        .unwrap();
        match &m.payload {
            MediaPayload::PhotoFrame { frame_color, .. } => assert_eq!(frame_color, DEFAULT_FRAME_COLOR),
            _ => unreachable!(),
        }
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn retrieval_takes_top_row_only() {
        let m = synthesize_retrieval(
            &memory_result(&[("m1", "a.jpg", "positive"), ("m2", "b.jpg", "positive")]),
            &prefs(Some("light_blue")),
        )
        .unwrap();
        assert_eq!(m.source_refs, BTreeSet::from(["m1".to_string()]));
    }

    #[test]
    fn negative_sentiment_suppresses_and_neutral_is_calm() {
        assert!(matches!(
            synthesize_retrieval(&memory_result(&[("m1", "a.jpg", "negative")]), &prefs(None)),
            Err(SynthesisError::SuppressedSentiment(_))
        ));
        let m = synthesize_retrieval(&memory_result(&[("m1", "a.jpg", "neutral")]), &prefs(None)).unwrap();
        match m.payload {
            MediaPayload::PhotoFrame { emotional_tag, .. } => assert_eq!(emotional_tag, "calm"),
            _ => unreachable!(),
        }
    }

    #[test]
    fn retrieved_payload_strings_come_from_chronicle_or_constants() {
        let graph = prefs(Some("light_blue"));
        let m = synthesize_retrieval(&memory_result(&[("m1", "x.jpg", "positive")]), &graph).unwrap();
        let MediaPayload::PhotoFrame { image, frame_color, emotional_tag } = m.payload else {
            unreachable!()
        };
        assert_eq!(image, "x.jpg");
        assert_eq!(Some(frame_color), favorite_color(&graph));
        assert_eq!(Some(emotional_tag.as_str()), emotional_tag_for("positive"));
    }

    fn emotional_tag_for(s: &str) -> Option<&'static str> {
        emotional_tag(s)
    }

    #[test]
    fn generated_text_panel() {
        let mut g = prefs(None);
        g.add_node(
            ChronicleNode::new("m1", ["Memory"])
                .with_property("location", "Berlin")
                .with_property("sentiment", "positive")
                .with_timestamp(1),
        )
        .unwrap();
        let a = synthesize_generated(&g, &["m1".into()], "describe").unwrap();
        let b = synthesize_generated(&g, &["m1".into()], "describe").unwrap();
        assert_eq!(a, b);
        let MediaPayload::TextPanel { text } = &a.payload else { unreachable!() };
        assert_eq!(text, "describe\nMemory m1: location: Berlin; sentiment: positive");
        assert_eq!(a.provenance, Provenance::Generated);
        assert_eq!(
            synthesize_generated(&g, &[], "describe").unwrap_err(),
            SynthesisError::EmptyCondition
        );
    }

    proptest! {
        #[test]
        fn proportions_sum_to_one(amounts in prop::collection::vec(0.0f64..1e6, 1..20)) {
            let records: Vec<_> = amounts.iter().enumerate().map(|(i, a)| rec(&format!("c{i}"), *a)).collect();
            match synthesize_pie(&records) {
                Ok(m) => prop_assert!((proportions(&m).iter().sum::<f64>() - 1.0).abs() <= PROPORTION_TOLERANCE),
                Err(e) => {
                    prop_assert_eq!(e, SynthesisError::DegenerateTotal);
                    prop_assert!(amounts.iter().all(|a| *a == 0.0));
                }
            }
        }

        #[test]
        fn proportions_scale_invariant(amounts in prop::collection::vec(0.01f64..1e4, 1..10), c in 1e-3f64..1e6) {
            let a: Vec<_> = amounts.iter().map(|x| rec("k", *x)).collect();
            let b: Vec<_> = amounts.iter().map(|x| rec("k", *x * c)).collect();
            let pa = proportions(&synthesize_pie(&a).unwrap());
            let pb = proportions(&synthesize_pie(&b).unwrap());
            for (x, y) in pa.iter().zip(&pb) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
