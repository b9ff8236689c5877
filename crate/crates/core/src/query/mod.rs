//! The MATCH / WHERE / RETURN path-query fragment used against Chronicles.
//!
//! ```text
//! MATCH (u:User)-[:OWNS]->(c:CreditCard)-[:HAS_SPENDING]->(s:Spending)
//! WHERE u.id = "user_123"
//! RETURN s.category, s.amount
//! ```
//!
//! Only single left-to-right paths, conjunctive equality filters and property
//! projections are supported. Rows are ordered by bound node ids.

mod parser;

use std::collections::BTreeSet;
use std::fmt;

use crate::chronicle::{self, ChronicleGraph, Literal, QueryResult};

pub use parser::parse_query;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("variable `{0}` is not bound in MATCH")]
    UnboundVariable(String),
    #[error("variable `{0}` is bound more than once in MATCH")]
    DuplicateVariable(String),
    #[error("RETURN needs at least one projection")]
    EmptyReturn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePattern {
    pub var: String,
    pub label: Option<String>,
}

impl NodePattern {
    pub fn new(var: impl Into<String>, label: Option<&str>) -> Self {
        NodePattern {
            var: var.into(),
            label: label.map(str::to_string),
        }
    }
}

/// A `-[:REL]->` hop. Only left-to-right edges exist in the language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePattern {
    pub rel: String,
}

/// `var.property = literal`
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub var: String,
    pub property: String,
    pub value: Literal,
}

/// `var.property` in RETURN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub var: String,
    pub property: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub start: NodePattern,
    pub hops: Vec<(EdgePattern, NodePattern)>,
    pub filters: Vec<Predicate>,
    pub returns: Vec<Projection>,
}

impl QueryAst {
    /// Node patterns in path order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodePattern> {
        std::iter::once(&self.start).chain(self.hops.iter().map(|(_, n)| n))
    }

    /// Checks that path variables are unique and every filter/projection
    /// variable is bound by the path.
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.returns.is_empty() {
            return Err(QueryError::EmptyReturn);
        }
        let mut bound = BTreeSet::new();
        for n in self.nodes() {
            if !bound.insert(n.var.as_str()) {
                return Err(QueryError::DuplicateVariable(n.var.clone()));
            }
        }
        let used = self
            .filters
            .iter()
            .map(|p| &p.var)
            .chain(self.returns.iter().map(|p| &p.var));
        for var in used {
            if !bound.contains(var.as_str()) {
                return Err(QueryError::UnboundVariable(var.clone()));
            }
        }
        Ok(())
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, value: &Literal) -> fmt::Result {
    match value {
        Literal::Str(s) => {
            f.write_str("\"")?;
            for c in s.chars() {
                match c {
                    '"' => f.write_str("\\\"")?,
                    '\\' => f.write_str("\\\\")?,
                    '\n' => f.write_str("\\n")?,
                    '\t' => f.write_str("\\t")?,
                    '\r' => f.write_str("\\r")?,
                    c => write!(f, "{c}")?,
                }
            }
            f.write_str("\"")
        }
        Literal::Num(n) => write!(f, "{n}"),
        Literal::Bool(b) => write!(f, "{b}"),
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, n: &NodePattern) -> fmt::Result {
    match &n.label {
        Some(label) => write!(f, "({}:{})", n.var, label),
        None => write!(f, "({})", n.var),
    }
}

/// Canonical one-clause-per-line form.
impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MATCH ")?;
        write_node(f, &self.start)?;
        for (edge, node) in &self.hops {
            write!(f, "-[:{}]->", edge.rel)?;
            write_node(f, node)?;
        }
        if !self.filters.is_empty() {
            f.write_str("\nWHERE ")?;
            for (i, p) in self.filters.iter().enumerate() {
                if i > 0 {
                    f.write_str(" AND ")?;
                }
                write!(f, "{}.{} = ", p.var, p.property)?;
                write_literal(f, &p.value)?;
            }
        }
        f.write_str("\nRETURN ")?;
        for (i, p) in self.returns.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}.{}", p.var, p.property)?;
        }
        Ok(())
    }
}

pub fn format_query(ast: &QueryAst) -> String {
    ast.to_string()
}

pub fn execute(ast: &QueryAst, graph: &ChronicleGraph) -> QueryResult {
    chronicle::match_pattern(graph, ast)
}
