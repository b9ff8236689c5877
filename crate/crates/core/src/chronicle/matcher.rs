use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{ChronicleGraph, ChronicleNode, Literal};
use crate::query::QueryAst;

/// One match: the bound node ids in path order and one value per RETURN item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRow {
    pub nodes: Vec<String>,
    pub values: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct QueryResult {
    /// `var.property` for every RETURN item.
    pub columns: Vec<String>,
    pub rows: Vec<QueryRow>,
}

impl QueryResult {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of the column whose property name is `property`.
    pub fn column(&self, property: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.rsplit('.').next() == Some(property))
    }
}

/// Evaluates a linear path pattern.
///
/// A binding assigns one node to every path variable such that each hop is
/// backed by at least one edge of the right relationship; parallel edges do
/// not multiply rows. Bindings failing a WHERE equality, or lacking any
/// returned property, are dropped. Rows come out sorted by their node-id tuple.
pub fn match_pattern(graph: &ChronicleGraph, ast: &QueryAst) -> QueryResult {
    let columns = ast
        .returns
        .iter()
        .map(|p| format!("{}.{}", p.var, p.property))
        .collect();

    let mut adjacency: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
    for e in graph.edges() {
        adjacency
            .entry((e.from.as_str(), e.rel.as_str()))
            .or_default()
            .insert(e.to.as_str());
    }

    let pattern: Vec<(&str, Option<&str>)> = ast
        .nodes()
        .map(|n| (n.var.as_str(), n.label.as_deref()))
        .collect();

    let mut matcher = Matcher {
        graph,
        ast,
        adjacency,
        pattern,
        bound: Vec::new(),
        rows: Vec::new(),
    };
    for node in graph.nodes() {
        matcher.descend(node);
    }

    QueryResult {
        columns,
        rows: matcher.rows,
    }
}

struct Matcher<'a> {
    graph: &'a ChronicleGraph,
    ast: &'a QueryAst,
    adjacency: BTreeMap<(&'a str, &'a str), BTreeSet<&'a str>>,
    pattern: Vec<(&'a str, Option<&'a str>)>,
    bound: Vec<&'a ChronicleNode>,
    rows: Vec<QueryRow>,
}

impl<'a> Matcher<'a> {
    fn accepts(&self, position: usize, node: &ChronicleNode) -> bool {
        let (var, label) = self.pattern[position];
        if label.is_some_and(|l| !node.has_label(l)) {
            return false;
        }
        self.ast
            .filters
            .iter()
            .filter(|p| p.var == var)
            .all(|p| node.property(&p.property).as_ref() == Some(&p.value))
    }

    fn descend(&mut self, node: &'a ChronicleNode) {
        let position = self.bound.len();
        if !self.accepts(position, node) {
            return;
        }
        self.bound.push(node);
        if position + 1 == self.pattern.len() {
            self.emit();
        } else {
            let rel = self.ast.hops[position].0.rel.as_str();
            let targets: Vec<&'a str> = self
                .adjacency
                .get(&(node.id.as_str(), rel))
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default();
            for target in targets {
                if let Some(next) = self.graph.node(target) {
                    self.descend(next);
                }
            }
        }
        self.bound.pop();
    }

    fn emit(&mut self) {
        let mut values = Vec::with_capacity(self.ast.returns.len());
        for proj in &self.ast.returns {
            let Some(position) = self.pattern.iter().position(|(v, _)| *v == proj.var) else {
                return;
            };
            match self.bound[position].property(&proj.property) {
                Some(v) => values.push(v),
                None => return,
            }
        }
        self.rows.push(QueryRow {
            nodes: self.bound.iter().map(|n| n.id.clone()).collect(),
            values,
        });
    }
}
