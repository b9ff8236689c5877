//! The reasoner: extraction of entities and intents from a situation,
//! semantic alignment with Chronicle nodes, query formulation over a label
//! schema, and the spatial / ontological / thematic / temporal modes.

mod goals;
mod spatial;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chronicle::{ChronicleGraph, Literal};
use crate::embedding::{similarity_with, Embedder, HashedBagEmbedder, SimilarityScore};
use crate::query::{EdgePattern, NodePattern, Predicate, Projection, QueryAst};
use crate::scribe::SituationGraph;

pub use goals::{
    query_temporal, select_emotional_goal, theme_for_cause, EmotionalGoal, RetrievalIntent,
    TemporalOrder, RETRIEVE_MEMORY,
};
pub use spatial::{
    default_surface_need, infer_affordance, infer_affordance_with, resolve_anchor,
    resolve_anchor_diagnostics, resolve_anchor_with, AnchorDiagnostics, SymbolicReference,
    SPATIAL_QUALIFIERS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReasoningError {
    #[error("invalid reasoner config: {0}")]
    InvalidConfig(String),
    #[error("no schema path from {from} to {to}")]
    NoSchemaPath { from: String, to: String },
    #[error("label {0} declares no value properties")]
    NoValueProperties(String),
    #[error("nothing to formulate a query from")]
    NothingToQuery,
    #[error("empty symbolic reference")]
    EmptyReference,
    #[error("no anchors available")]
    NoAnchors,
    #[error("no semantic match for `{reference}` (best score {best:.6} < θ {threshold})")]
    NoSemanticMatch {
        reference: String,
        best: f64,
        threshold: f64,
    },
    #[error("nothing in front of the user among {candidates:?}")]
    NothingInFront { candidates: Vec<String> },
    #[error("user facing vector must be non-zero")]
    ZeroFacing,
    #[error("situation has no has_emotion triple")]
    MissingEmotion,
    #[error("label {0} is not in the schema table")]
    UnknownLabel(String),
    #[error("schema table: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerConfig {
    pub similarity_threshold: f64,
    pub max_front_distance: f64,
    pub node_align_top_k: usize,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            similarity_threshold: 0.35,
            max_front_distance: 5.0,
            node_align_top_k: 8,
        }
    }
}

impl ReasonerConfig {
    pub fn validate(&self) -> Result<(), ReasoningError> {
        let theta = self.similarity_threshold;
        if !(0.0..=1.0).contains(&theta) {
            return Err(ReasoningError::InvalidConfig(format!("θ = {theta} outside [0, 1]")));
        }
        if !(self.max_front_distance > 0.0 && self.max_front_distance.is_finite()) {
            return Err(ReasoningError::InvalidConfig(format!(
                "max_front_distance = {} must be positive",
                self.max_front_distance
            )));
        }
        if self.node_align_top_k == 0 {
            return Err(ReasoningError::InvalidConfig("node_align_top_k must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionResult {
    pub entities: BTreeSet<String>,
    pub relations: BTreeSet<String>,
}

/// `E` = objects of `has_target_entity`, `R` = objects of `has_intent`.
pub fn extract_entities_relations(situation: &SituationGraph) -> ExtractionResult {
    ExtractionResult {
        entities: situation.objects("has_target_entity").map(str::to_string).collect(),
        relations: situation.objects("has_intent").map(str::to_string).collect(),
    }
}

/// Ranks Chronicle nodes by similarity to the whole situation text;
/// descending score, ties by id, truncated to `top_k`.
pub fn align_nodes(
    situation: &SituationGraph,
    graph: &ChronicleGraph,
    cfg: &ReasonerConfig,
) -> Vec<(String, SimilarityScore)> {
    align_nodes_with(&HashedBagEmbedder::default(), situation, graph, cfg)
}

pub fn align_nodes_with(
    embedder: &dyn Embedder,
    situation: &SituationGraph,
    graph: &ChronicleGraph,
    cfg: &ReasonerConfig,
) -> Vec<(String, SimilarityScore)> {
    let text = situation.text();
    let mut scored: Vec<(String, SimilarityScore)> = graph
        .nodes()
        .map(|n| (n.id.clone(), similarity_with(embedder, &text, &n.text())))
        .collect();
    scored.sort_by(|a, b| b.1.value().total_cmp(&a.1.value()).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(cfg.node_align_top_k);
    scored
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemaEdge {
    pub from: String,
    pub rel: String,
    pub to: String,
}

/// Labels with their value-bearing properties (in RETURN order) and the
/// relationships that connect them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaTable {
    labels: BTreeMap<String, Vec<String>>,
    edges: Vec<(String, String, String)>,
}

pub const ROOT_LABEL: &str = "User";

impl Default for SchemaTable {
    fn default() -> Self {
        let labels = [
            ("User", &["name"][..]),
            ("CreditCard", &["issuer"]),
            ("Spending", &["category", "amount"]),
            ("Memory", &["image", "location", "sentiment"]),
            ("Preference", &["category", "value"]),
            ("Visualization", &[]),
        ];
        let edges = [
            ("User", "OWNS", "CreditCard"),
            ("CreditCard", "HAS_SPENDING", "Spending"),
            ("User", "HAS_MEMORY", "Memory"),
            ("User", "HAS_PREFERENCE", "Preference"),
            ("User", "ATTENDED", "Visualization"),
        ];
        SchemaTable {
            labels: labels
                .iter()
                .map(|(l, p)| (l.to_string(), p.iter().map(|s| s.to_string()).collect()))
                .collect(),
            edges: edges
                .iter()
                .map(|(a, r, b)| (a.to_string(), r.to_string(), b.to_string()))
                .collect(),
        }
    }
}

impl SchemaTable {
    pub fn from_json(text: &str) -> Result<Self, ReasoningError> {
        let table: SchemaTable =
            serde_json::from_str(text).map_err(|e| ReasoningError::Schema(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    /// `<chronicle>.schema.json` next to a Chronicle file.
    pub fn sidecar_path(chronicle: &Path) -> PathBuf {
        chronicle.with_extension("schema.json")
    }

    /// The sidecar table when present, otherwise the built-in default.
    pub fn for_chronicle(chronicle: &Path) -> Result<Self, ReasoningError> {
        let path = Self::sidecar_path(chronicle);
        match std::fs::read_to_string(&path) {
            Ok(text) => Self::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(ReasoningError::Schema(format!("{}: {e}", path.display()))),
        }
    }

    pub fn validate(&self) -> Result<(), ReasoningError> {
        if !self.labels.contains_key(ROOT_LABEL) {
            return Err(ReasoningError::Schema(format!("missing root label {ROOT_LABEL}")));
        }
        for (a, _, b) in &self.edges {
            for l in [a, b] {
                if !self.labels.contains_key(l) {
                    return Err(ReasoningError::Schema(format!("edge mentions undeclared label {l}")));
                }
            }
        }
        Ok(())
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn value_properties(&self, label: &str) -> Option<&[String]> {
        self.labels.get(label).map(Vec::as_slice)
    }

    pub fn edges(&self) -> impl Iterator<Item = SchemaEdge> + '_ {
        self.edges.iter().map(|(from, rel, to)| SchemaEdge {
            from: from.clone(),
            rel: rel.clone(),
            to: to.clone(),
        })
    }

    /// Shortest edge path `from → to` (BFS, neighbours in `(rel, to)` order).
    /// `Some(vec![])` when `from == to`.
    pub fn path(&self, from: &str, to: &str) -> Option<Vec<SchemaEdge>> {
        if !self.has_label(from) || !self.has_label(to) {
            return None;
        }
        let mut adjacency: BTreeMap<&str, Vec<SchemaEdge>> = BTreeMap::new();
        for e in self.edges() {
            adjacency.entry(self.label_key(&e.from)).or_default().push(e);
        }
        for list in adjacency.values_mut() {
            list.sort_by(|a, b| (&a.rel, &a.to).cmp(&(&b.rel, &b.to)));
        }
        let mut previous: BTreeMap<String, SchemaEdge> = BTreeMap::new();
        let mut seen = BTreeSet::from([from.to_string()]);
        let mut queue = VecDeque::from([from.to_string()]);
        while let Some(label) = queue.pop_front() {
            if label == to {
                let mut path = Vec::new();
                let mut cur = label;
                while let Some(edge) = previous.get(&cur) {
                    cur = edge.from.clone();
                    path.push(edge.clone());
                }
                path.reverse();
                return Some(path);
            }
            for edge in adjacency.get(label.as_str()).into_iter().flatten() {
                if seen.insert(edge.to.clone()) {
                    previous.insert(edge.to.clone(), edge.clone());
                    queue.push_back(edge.to.clone());
                }
            }
        }
        None
    }

    fn label_key<'a>(&'a self, label: &str) -> &'a str {
        self.labels
            .get_key_value(label)
            .map(|(k, _)| k.as_str())
            .unwrap_or("")
    }

    /// Matches an entity identifier such as `credit_card` to `CreditCard`.
    pub fn label_for_entity(&self, entity: &str) -> Option<&str> {
        let key = normalize(entity);
        self.labels().find(|l| normalize(l) == key)
    }

    /// The first of a node's labels that the schema knows.
    pub fn label_of<'a>(&self, labels: &'a BTreeSet<String>) -> Option<&'a str> {
        labels.iter().map(String::as_str).find(|l| self.has_label(l))
    }
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Builds `MATCH (u:User)-[..]->...(t:Terminal) [WHERE ...] RETURN t.<values>`
/// along `path`; variables are label initials, de-duplicated with a suffix.
pub fn build_path_query(
    schema: &SchemaTable,
    path: &[SchemaEdge],
    filters: impl FnOnce(&[NodePattern]) -> Vec<Predicate>,
) -> Result<QueryAst, ReasoningError> {
    let mut labels = vec![path.first().map_or(ROOT_LABEL, |e| e.from.as_str())];
    labels.extend(path.iter().map(|e| e.to.as_str()));
    let terminal = *labels.last().expect("at least the root label");
    let values = schema
        .value_properties(terminal)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ReasoningError::NoValueProperties(terminal.to_string()))?;

    let mut used = BTreeSet::new();
    let nodes: Vec<NodePattern> = labels
        .iter()
        .map(|label| {
            let base: String = label
                .chars()
                .next()
                .map(|c| c.to_lowercase().collect())
                .unwrap_or_else(|| "n".into());
            let mut var = base.clone();
            let mut k = 2;
            while !used.insert(var.clone()) {
                var = format!("{base}{k}");
                k += 1;
            }
            NodePattern::new(var, Some(label))
        })
        .collect();

    let filters = filters(&nodes);
    let terminal_var = nodes.last().expect("non-empty").var.clone();
    let mut iter = nodes.into_iter();
    let start = iter.next().expect("non-empty");
    let hops = path
        .iter()
        .zip(iter)
        .map(|(e, n)| (EdgePattern { rel: e.rel.clone() }, n))
        .collect();
    let ast = QueryAst {
        start,
        hops,
        filters,
        returns: values
            .iter()
            .map(|p| Projection {
                var: terminal_var.clone(),
                property: p.clone(),
            })
            .collect(),
    };
    ast.validate()
        .map_err(|e| ReasoningError::Schema(e.to_string()))?;
    Ok(ast)
}

fn path_through(
    schema: &SchemaTable,
    via: &str,
    terminal: &str,
) -> Result<Vec<SchemaEdge>, ReasoningError> {
    let no_path = |from: &str, to: &str| ReasoningError::NoSchemaPath {
        from: from.to_string(),
        to: to.to_string(),
    };
    let mut path = schema.path(ROOT_LABEL, via).ok_or_else(|| no_path(ROOT_LABEL, via))?;
    path.extend(schema.path(via, terminal).ok_or_else(|| no_path(via, terminal))?);
    Ok(path)
}

/// Query for an extraction: path from the requester's `User` node through the
/// entity's label to the terminal label, filtered on the requester's id.
///
/// The terminal is a label reachable from the entity whose name appears in an
/// intent (`visualize_spending_profile` → `Spending`); failing that, the label
/// of the best-aligned reachable node; failing that, the entity label itself.
pub fn formulate_query(
    ex: &ExtractionResult,
    aligned: &[(String, SimilarityScore)],
    graph: &ChronicleGraph,
    schema: &SchemaTable,
    requester: &str,
) -> Result<QueryAst, ReasoningError> {
    if ex.entities.is_empty() && aligned.is_empty() {
        return Err(ReasoningError::NothingToQuery);
    }
    let aligned_labels: Vec<&str> = aligned
        .iter()
        .filter_map(|(id, _)| graph.node(id))
        .filter_map(|n| schema.label_of(&n.labels))
        .collect();

    let via = match ex.entities.iter().next() {
        Some(entity) => schema
            .label_for_entity(entity)
            .ok_or_else(|| ReasoningError::NoSchemaPath {
                from: ROOT_LABEL.to_string(),
                to: entity.clone(),
            })?
            .to_string(),
        None => aligned_labels
            .iter()
            .find(|l| **l != ROOT_LABEL && schema.path(ROOT_LABEL, l).is_some())
            .ok_or(ReasoningError::NothingToQuery)?
            .to_string(),
    };

    let intent_tokens: BTreeSet<String> = ex
        .relations
        .iter()
        .flat_map(|r| r.split('_').map(normalize).collect::<Vec<_>>())
        .collect();
    let reachable = |l: &&str| schema.path(&via, l).is_some();
    let terminal = schema
        .labels()
        .filter(reachable)
        .find(|l| intent_tokens.contains(&normalize(l)))
        .or_else(|| aligned_labels.iter().copied().find(|l| reachable(l)))
        .unwrap_or(via.as_str())
        .to_string();

    let path = path_through(schema, &via, &terminal)?;
    build_path_query(schema, &path, |nodes| {
        vec![Predicate {
            var: nodes[0].var.clone(),
            property: "id".into(),
            value: Literal::from(requester),
        }]
    })
}

/// The memory lookup for a retrieval intent: by context when one was chosen,
/// otherwise by the intent's sentiment filter.
pub fn formulate_retrieval(
    intent: &RetrievalIntent,
    schema: &SchemaTable,
) -> Result<QueryAst, ReasoningError> {
    let path = path_through(schema, "Memory", "Memory")?;
    build_path_query(schema, &path, |nodes| {
        let m = nodes.last().expect("non-empty").var.clone();
        vec![match &intent.context {
            Some(ctx) => Predicate {
                var: m,
                property: "context".into(),
                value: Literal::from(ctx.as_str()),
            },
            None => Predicate {
                var: m,
                property: "sentiment".into(),
                value: Literal::from(intent.sentiment.as_str()),
            },
        }]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningMode {
    Spatial,
    Temporal,
    Ontological,
    Thematic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningPlan {
    pub modes: BTreeSet<ReasoningMode>,
    pub query: QueryAst,
    pub anchor: Option<String>,
    pub goal: Option<String>,
}

impl ReasoningPlan {
    /// A spatial plan must carry its anchor.
    pub fn new(
        modes: BTreeSet<ReasoningMode>,
        query: QueryAst,
        anchor: Option<String>,
        goal: Option<String>,
    ) -> Result<Self, ReasoningError> {
        if modes.contains(&ReasoningMode::Spatial) && anchor.is_none() {
            return Err(ReasoningError::NoAnchors);
        }
        Ok(ReasoningPlan {
            modes,
            query,
            anchor,
            goal,
        })
    }
}
