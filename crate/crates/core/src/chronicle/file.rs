use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ChronicleEdge, ChronicleError, ChronicleGraph, ChronicleNode, Literal, LogEntry, Result,
    SCHEMA_VERSION,
};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNode {
    id: String,
    labels: Vec<String>,
    #[serde(default)]
    properties: BTreeMap<String, Literal>,
    #[serde(default)]
    timestamp: Option<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEdge {
    from: String,
    rel: String,
    to: String,
    #[serde(default)]
    properties: BTreeMap<String, Literal>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChronicleFile {
    schema_version: u32,
    owner: String,
    #[serde(default)]
    nodes: Vec<FileNode>,
    #[serde(default)]
    edges: Vec<FileEdge>,
    #[serde(default)]
    update_log: Vec<LogEntry>,
}

/// Parses a Chronicle document and checks every graph invariant.
pub fn parse_chronicle(text: &str) -> Result<ChronicleGraph> {
    let file: ChronicleFile =
        serde_json::from_str(text).map_err(|e| ChronicleError::Format {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(ChronicleError::InvalidField {
            field: "schema_version".into(),
            message: format!(
                "unsupported version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            ),
        });
    }
    if file.owner.is_empty() {
        return Err(ChronicleError::InvalidField {
            field: "owner".into(),
            message: "empty owner".into(),
        });
    }

    let mut graph = ChronicleGraph::new(file.owner);
    for n in file.nodes {
        let labels: BTreeSet<String> = n.labels.into_iter().collect();
        graph.add_node(ChronicleNode {
            id: n.id,
            labels,
            properties: n.properties,
            timestamp: n.timestamp,
        })?;
    }
    for e in file.edges {
        graph.add_edge(ChronicleEdge {
            from: e.from,
            rel: e.rel,
            to: e.to,
            properties: e.properties,
        })?;
    }
    graph.update_log = file.update_log;
    graph.validate()?;
    Ok(graph)
}

pub fn load_chronicle(path: impl AsRef<Path>) -> Result<ChronicleGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ChronicleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_chronicle(&text)
}

pub fn to_json_string(graph: &ChronicleGraph) -> String {
    let file = ChronicleFile {
        schema_version: graph.schema_version,
        owner: graph.owner.clone(),
        nodes: graph
            .nodes
            .values()
            .map(|n| FileNode {
                id: n.id.clone(),
                labels: n.labels.iter().cloned().collect(),
                properties: n.properties.clone(),
                timestamp: n.timestamp,
            })
            .collect(),
        edges: graph
            .edges
            .iter()
            .map(|e| FileEdge {
                from: e.from.clone(),
                rel: e.rel.clone(),
                to: e.to.clone(),
                properties: e.properties.clone(),
            })
            .collect(),
        update_log: graph.update_log.clone(),
    };
    // Only strings, finite numbers and booleans reach the serializer.
    serde_json::to_string_pretty(&file).expect("chronicle documents always serialize")
}

pub fn save_chronicle(graph: &ChronicleGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = to_json_string(graph);
    text.push('\n');
    fs::write(path, text).map_err(|source| ChronicleError::Io {
        path: path.to_path_buf(),
        source,
    })
}
