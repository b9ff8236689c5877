//! Chronicle identity graphs.
//!
//! A Chronicle is a labeled property graph describing one person: their
//! accounts, memories, preferences and whatever the feedback loop has learned
//! about them. Every mutation that arrives through [`ChronicleGraph::apply_update`]
//! is appended to an update log first; only a small whitelist of predicates is
//! materialized into nodes, edges or properties.

mod file;
mod matcher;
mod pool;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use file::{load_chronicle, parse_chronicle, save_chronicle, to_json_string};
pub use matcher::{match_pattern, QueryResult, QueryRow};
pub use pool::{ChronicleHandle, ChroniclePool};

/// Subject alias that always refers to the Chronicle owner's node.
pub const USER_ALIAS: &str = "user";

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ChronicleError {
    #[error("format error at line {line}, column {column}: {message}")]
    Format {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    InvalidField { field: String, message: String },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("integrity error: edge {edge} references missing node `{missing}`")]
    DanglingEdge { edge: String, missing: String },
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no Chronicle for owner `{0}`")]
    NotFound(String),
    #[error("`{requester}` has no consent to access the Chronicle of `{owner}`")]
    Denied { owner: String, requester: String },
}

pub type Result<T> = std::result::Result<T, ChronicleError>;

/// Property value stored on nodes and edges, and compared against in queries.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl Literal {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Literal::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

impl From<&str> for Literal {
    fn from(s: &str) -> Self {
        Literal::Str(s.to_string())
    }
}

impl From<String> for Literal {
    fn from(s: String) -> Self {
        Literal::Str(s)
    }
}

impl From<f64> for Literal {
    fn from(n: f64) -> Self {
        Literal::Num(n)
    }
}

impl From<bool> for Literal {
    fn from(b: bool) -> Self {
        Literal::Bool(b)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => f.write_str(s),
            Literal::Num(n) => write!(f, "{n}"),
            Literal::Bool(b) => write!(f, "{b}"),
        }
    }
}

// Integral numbers are written as JSON integers so `320.0` stays `320` on the wire.
const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

impl Serialize for Literal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Literal::Str(s) => serializer.serialize_str(s),
            Literal::Bool(b) => serializer.serialize_bool(*b),
            Literal::Num(n) if n.fract() == 0.0 && n.abs() < MAX_EXACT_INT => {
                serializer.serialize_i64(*n as i64)
            }
            Literal::Num(n) => serializer.serialize_f64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct LiteralVisitor;

        impl Visitor<'_> for LiteralVisitor {
            type Value = Literal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a string, number or boolean")
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> std::result::Result<Literal, E> {
                Ok(Literal::Bool(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Literal, E> {
                Ok(Literal::Num(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Literal, E> {
                Ok(Literal::Num(v as f64))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Literal, E> {
                Ok(Literal::Num(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Literal, E> {
                Ok(Literal::Str(v.to_string()))
            }

            fn visit_string<E: de::Error>(self, v: String) -> std::result::Result<Literal, E> {
                Ok(Literal::Str(v))
            }
        }

        deserializer.deserialize_any(LiteralVisitor)
    }
}

pub(crate) fn is_predicate_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

pub(crate) fn is_relationship_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('A'..='Z'))
        && chars.all(|c| matches!(c, 'A'..='Z' | '0'..='9' | '_'))
}

/// A `<subject, predicate, object>` statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(
    try_from = "(String, String, String)",
    into = "(String, String, String)"
)]
pub struct Triple {
    subject: String,
    predicate: String,
    object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Result<Self> {
        let triple = Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        };
        if triple.subject.is_empty() {
            return Err(ChronicleError::InvalidTriple(format!(
                "{triple}: empty subject"
            )));
        }
        if !is_predicate_name(&triple.predicate) {
            return Err(ChronicleError::InvalidTriple(format!(
                "{triple}: predicate must match [a-z][a-z0-9_]*"
            )));
        }
        Ok(triple)
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn object(&self) -> &str {
        &self.object
    }
}

impl TryFrom<(String, String, String)> for Triple {
    type Error = ChronicleError;

    fn try_from((s, p, o): (String, String, String)) -> Result<Self> {
        Triple::new(s, p, o)
    }
}

impl From<Triple> for (String, String, String) {
    fn from(t: Triple) -> Self {
        (t.subject, t.predicate, t.object)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronicleNode {
    pub id: String,
    pub labels: BTreeSet<String>,
    pub properties: BTreeMap<String, Literal>,
    pub timestamp: Option<i64>,
}

impl ChronicleNode {
    pub fn new<I, S>(id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ChronicleNode {
            id: id.into(),
            labels: labels.into_iter().map(Into::into).collect(),
            properties: BTreeMap::new(),
            timestamp: None,
        }
    }

    pub fn with_property(mut self, key: impl Into<String>, value: impl Into<Literal>) -> Self {
        self.properties.insert(key.into(), value.into());
        self
    }

    pub fn with_timestamp(mut self, ts: i64) -> Self {
        self.timestamp = Some(ts);
        self
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    /// Property lookup used by queries. `id` falls back to the node id when the
    /// node carries no explicit `id` property.
    pub fn property(&self, name: &str) -> Option<Literal> {
        match self.properties.get(name) {
            Some(v) => Some(v.clone()),
            None if name == "id" => Some(Literal::Str(self.id.clone())),
            None => None,
        }
    }

    /// Text used for embedding: labels followed by string property values, lowercased.
    pub fn text(&self) -> String {
        let mut parts: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        parts.extend(self.properties.values().filter_map(Literal::as_str));
        parts.join(" ").to_lowercase()
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(ChronicleError::InvalidField {
                field: "nodes[].id".into(),
                message: "empty node id".into(),
            });
        }
        if self.labels.is_empty() {
            return Err(ChronicleError::InvalidField {
                field: format!("nodes[{}].labels", self.id),
                message: "node must carry at least one label".into(),
            });
        }
        if self.has_label("Memory") && self.timestamp.is_none() {
            return Err(ChronicleError::InvalidField {
                field: format!("nodes[{}].timestamp", self.id),
                message: "Memory nodes require a timestamp".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronicleEdge {
    pub from: String,
    pub rel: String,
    pub to: String,
    pub properties: BTreeMap<String, Literal>,
}

impl ChronicleEdge {
    pub fn new(from: impl Into<String>, rel: impl Into<String>, to: impl Into<String>) -> Self {
        ChronicleEdge {
            from: from.into(),
            rel: rel.into(),
            to: to.into(),
            properties: BTreeMap::new(),
        }
    }
}

impl fmt::Display for ChronicleEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})-[:{}]->({})", self.from, self.rel, self.to)
    }
}

/// One entry of the append-only update log. Serialized as `[ts, [s, p, o], source]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(i64, Triple, String)", into = "(i64, Triple, String)")]
pub struct LogEntry {
    pub ts: i64,
    pub triple: Triple,
    pub source: String,
}

impl From<(i64, Triple, String)> for LogEntry {
    fn from((ts, triple, source): (i64, Triple, String)) -> Self {
        LogEntry { ts, triple, source }
    }
}

impl From<LogEntry> for (i64, Triple, String) {
    fn from(e: LogEntry) -> Self {
        (e.ts, e.triple, e.source)
    }
}

/// Outcome of [`ChronicleGraph::apply_update`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UpdateReport {
    pub materialized: Vec<Triple>,
    pub logged_only: Vec<Triple>,
}

impl UpdateReport {
    pub fn is_empty(&self) -> bool {
        self.materialized.is_empty() && self.logged_only.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronicleGraph {
    owner: String,
    schema_version: u32,
    nodes: BTreeMap<String, ChronicleNode>,
    edges: Vec<ChronicleEdge>,
    update_log: Vec<LogEntry>,
}

impl ChronicleGraph {
    pub fn new(owner: impl Into<String>) -> Self {
        ChronicleGraph {
            owner: owner.into(),
            schema_version: SCHEMA_VERSION,
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            update_log: Vec::new(),
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn node(&self, id: &str) -> Option<&ChronicleNode> {
        self.nodes.get(id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &ChronicleNode> {
        self.nodes.values()
    }

    pub fn nodes_with_label<'a>(
        &'a self,
        label: &'a str,
    ) -> impl Iterator<Item = &'a ChronicleNode> + 'a {
        self.nodes.values().filter(move |n| n.has_label(label))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[ChronicleEdge] {
        &self.edges
    }

    pub fn update_log(&self) -> &[LogEntry] {
        &self.update_log
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn add_node(&mut self, node: ChronicleNode) -> Result<()> {
        node.validate()?;
        if self.nodes.contains_key(&node.id) {
            return Err(ChronicleError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: ChronicleEdge) -> Result<()> {
        if !is_relationship_name(&edge.rel) {
            return Err(ChronicleError::InvalidField {
                field: format!("edges[{edge}].rel"),
                message: "relationship must match [A-Z][A-Z0-9_]*".into(),
            });
        }
        for end in [&edge.from, &edge.to] {
            if !self.nodes.contains_key(end) {
                return Err(ChronicleError::DanglingEdge {
                    edge: edge.to_string(),
                    missing: end.clone(),
                });
            }
        }
        self.edges.push(edge);
        Ok(())
    }

    fn has_edge(&self, from: &str, rel: &str, to: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.from == from && e.rel == rel && e.to == to)
    }

    /// Checks every structural invariant; used after loading and in tests.
    pub fn validate(&self) -> Result<()> {
        for node in self.nodes.values() {
            node.validate()?;
        }
        for edge in &self.edges {
            for end in [&edge.from, &edge.to] {
                if !self.nodes.contains_key(end) {
                    return Err(ChronicleError::DanglingEdge {
                        edge: edge.to_string(),
                        missing: end.clone(),
                    });
                }
            }
        }
        if self.update_log.windows(2).any(|w| w[1].ts < w[0].ts) {
            return Err(ChronicleError::InvalidField {
                field: "update_log".into(),
                message: "timestamps must be non-decreasing".into(),
            });
        }
        Ok(())
    }

    /// Resolves the `user` alias (and the owner id itself) to the owner node id.
    fn subject_node(&self, subject: &str) -> Option<String> {
        (subject == USER_ALIAS || subject == self.owner).then(|| self.owner.clone())
    }

    fn ensure_node(&mut self, id: &str, label: &str, ts: i64) {
        if !self.nodes.contains_key(id) {
            let node = ChronicleNode::new(id, [label]).with_timestamp(ts);
            self.nodes.insert(id.to_string(), node);
        }
    }

    /// Appends every triple to the update log, then materializes the whitelisted
    /// predicates:
    ///
    /// * `has_attention_on X` becomes an `ATTENDED` edge from the owner to `X`
    ///   (a `Visualization` node is created for `X` when missing);
    /// * `has_emotion E` sets `last_emotion = E` on the owner node;
    /// * `has_preference P` attaches a `Preference` node via `HAS_PREFERENCE`.
    ///
    /// Only triples whose subject is the owner (or the `user` alias) are
    /// materialized. Log timestamps never go backwards: `ts` is clamped to the
    /// last logged timestamp.
    pub fn apply_update(&mut self, triples: &[Triple], source: &str, ts: i64) -> UpdateReport {
        let mut report = UpdateReport::default();
        let ts = self.update_log.last().map_or(ts, |last| ts.max(last.ts));

        for triple in triples {
            self.update_log.push(LogEntry {
                ts,
                triple: triple.clone(),
                source: source.to_string(),
            });

            let Some(owner) = self.subject_node(triple.subject()) else {
                report.logged_only.push(triple.clone());
                continue;
            };
            let object = triple.object();
            let materialized = match triple.predicate() {
                "has_attention_on" if !object.is_empty() => {
                    self.ensure_node(&owner, "User", ts);
                    self.ensure_node(object, "Visualization", ts);
                    if !self.has_edge(&owner, "ATTENDED", object) {
                        self.edges
                            .push(ChronicleEdge::new(owner.as_str(), "ATTENDED", object));
                    }
                    true
                }
                "has_emotion" if !object.is_empty() => {
                    self.ensure_node(&owner, "User", ts);
                    if let Some(node) = self.nodes.get_mut(&owner) {
                        node.properties
                            .insert("last_emotion".into(), Literal::Str(object.to_string()));
                    }
                    true
                }
                "has_preference" if !object.is_empty() => {
                    self.ensure_node(&owner, "User", ts);
                    let pref_id = format!("pref_{object}");
                    if !self.nodes.contains_key(&pref_id) {
                        let node = ChronicleNode::new(pref_id.as_str(), ["Preference"])
                            .with_property("value", object)
                            .with_timestamp(ts);
                        self.nodes.insert(pref_id.clone(), node);
                    }
                    if !self.has_edge(&owner, "HAS_PREFERENCE", &pref_id) {
                        self.edges
                            .push(ChronicleEdge::new(owner.as_str(), "HAS_PREFERENCE", pref_id));
                    }
                    true
                }
                _ => false,
            };
            if materialized {
                report.materialized.push(triple.clone());
            } else {
                report.logged_only.push(triple.clone());
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str, p: &str, o: &str) -> Triple {
        Triple::new(s, p, o).unwrap()
    }

    fn seed() -> ChronicleGraph {
        let mut g = ChronicleGraph::new("user_123");
        g.add_node(ChronicleNode::new("user_123", ["User"])).unwrap();
        g
    }

    #[test]
    fn triple_validation() {
        assert!(Triple::new("situation_1", "has_intent", "x").is_ok());
        assert!(Triple::new("", "has_intent", "x").is_err());
        assert!(Triple::new("s", "HasIntent", "x").is_err());
        assert!(Triple::new("s", "1abc", "x").is_err());
        assert!(Triple::new("s", "", "x").is_err());
    }

    #[test]
    fn literal_integral_numbers_serialize_as_integers() {
        assert_eq!(serde_json::to_string(&Literal::Num(320.0)).unwrap(), "320");
        assert_eq!(serde_json::to_string(&Literal::Num(0.5)).unwrap(), "0.5");
        let back: Literal = serde_json::from_str("320").unwrap();
        assert_eq!(back, Literal::Num(320.0));
        assert!(serde_json::from_str::<Literal>("null").is_err());
    }

    #[test]
    fn node_text_is_labels_and_string_properties_lowercased() {
        let n = ChronicleNode::new("s1", ["Spending"])
            .with_property("category", "Dining")
            .with_property("amount", 320.0);
        assert_eq!(n.text(), "spending dining");
    }

    #[test]
    fn id_pseudo_property() {
        let n = ChronicleNode::new("user_123", ["User"]);
        assert_eq!(n.property("id"), Some(Literal::from("user_123")));
        let n = n.with_property("id", "explicit");
        assert_eq!(n.property("id"), Some(Literal::from("explicit")));
    }

    #[test]
    fn memory_nodes_need_timestamps() {
        let mut g = seed();
        let err = g
            .add_node(ChronicleNode::new("m1", ["Memory"]))
            .unwrap_err();
        assert!(matches!(err, ChronicleError::InvalidField { .. }));
    }

    #[test]
    fn dangling_edge_names_missing_node() {
        let mut g = seed();
        let err = g
            .add_edge(ChronicleEdge::new("user_123", "OWNS", "ghost"))
            .unwrap_err();
        match err {
            ChronicleError::DanglingEdge { missing, .. } => assert_eq!(missing, "ghost"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn attention_materializes_attended_edge() {
        let mut g = seed();
        let report = g.apply_update(&[t("user", "has_attention_on", "pie_chart_001")], "monitor", 10);
        assert_eq!(report.materialized.len(), 1);
        assert!(g.has_edge("user_123", "ATTENDED", "pie_chart_001"));
        assert!(g.node("pie_chart_001").unwrap().has_label("Visualization"));
        g.validate().unwrap();
    }

    #[test]
    fn emotion_sets_last_emotion_property() {
        let mut g = seed();
        g.apply_update(&[t("user", "has_emotion", "happy")], "monitor", 10);
        assert_eq!(
            g.node("user_123").unwrap().properties.get("last_emotion"),
            Some(&Literal::from("happy"))
        );
        assert_eq!(g.update_log().len(), 1);
    }

    #[test]
    fn preference_creates_node_and_edge_once() {
        let mut g = seed();
        g.apply_update(&[t("user", "has_preference", "jazz")], "monitor", 1);
        g.apply_update(&[t("user", "has_preference", "jazz")], "monitor", 2);
        assert!(g.node("pref_jazz").unwrap().has_label("Preference"));
        assert_eq!(
            g.edges().iter().filter(|e| e.rel == "HAS_PREFERENCE").count(),
            1
        );
        assert_eq!(g.update_log().len(), 2);
    }

    #[test]
    fn non_whitelisted_and_foreign_subjects_are_logged_only() {
        let mut g = seed();
        let report = g.apply_update(
            &[
                t("user", "gaze_direction", "downward"),
                t("situation_2", "has_emotion", "sad"),
            ],
            "monitor",
            5,
        );
        assert!(report.materialized.is_empty());
        assert_eq!(report.logged_only.len(), 2);
        assert!(!g.node("user_123").unwrap().properties.contains_key("last_emotion"));
    }

    #[test]
    fn empty_update_changes_nothing() {
        let mut g = seed();
        let before = g.clone();
        let report = g.apply_update(&[], "monitor", 5);
        assert!(report.is_empty());
        assert_eq!(g, before);
    }

    #[test]
    fn log_timestamps_never_decrease() {
        let mut g = seed();
        g.apply_update(&[t("user", "has_emotion", "sad")], "monitor", 100);
        g.apply_update(&[t("user", "has_emotion", "happy")], "monitor", 50);
        let ts: Vec<i64> = g.update_log().iter().map(|e| e.ts).collect();
        assert_eq!(ts, vec![100, 100]);
        g.validate().unwrap();
    }
}
