//! Brute-force reference implementations and random instance generators,
//! shared by the integration and acceptance suites.

#![allow(dead_code)]

use std::collections::BTreeSet;

use pair_core::chronicle::{ChronicleEdge, ChronicleGraph, ChronicleNode, Literal};
use pair_core::embedding::semantic_similarity;
use pair_core::query::{EdgePattern, NodePattern, Predicate, Projection, QueryAst};
use pair_core::reasoner::{ReasonerConfig, SymbolicReference};
use pair_core::scene::{AnchorPoint, UserPose, Vec3};
use rand::seq::SliceRandom;
use rand::Rng;

pub const LABELS: &[&str] = &["Alpha", "Beta", "Gamma"];
pub const RELS: &[&str] = &["LINKS", "OWNS"];
const WORDS: &[&str] = &["red", "blue", "green"];

/// Random graph: `n` nodes (`n0`, `n1`, …) with 1–2 labels, an integer
/// property `p`, a string property `q` on most nodes, and random edges
/// (parallel edges and self-loops allowed).
pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> ChronicleGraph {
    let mut g = ChronicleGraph::new("n0");
    for i in 0..n {
        let mut labels = vec![*LABELS.choose(rng).unwrap()];
        if rng.gen_bool(0.3) {
            labels.push(LABELS.choose(rng).unwrap());
        }
        let mut node = ChronicleNode::new(format!("n{i}"), labels)
            .with_property("p", f64::from(rng.gen_range(0..3)));
        if rng.gen_bool(0.8) {
            node = node.with_property("q", *WORDS.choose(rng).unwrap());
        }
        g.add_node(node).unwrap();
    }
    let edges = rng.gen_range(0..=n * 2);
    for _ in 0..edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        g.add_edge(ChronicleEdge::new(format!("n{a}"), *RELS.choose(rng).unwrap(), format!("n{b}")))
            .unwrap();
    }
    g
}

fn random_literal<R: Rng>(rng: &mut R, property: &str, n: usize) -> Literal {
    match property {
        "p" => Literal::from(f64::from(rng.gen_range(0..3))),
        "q" => Literal::from(*WORDS.choose(rng).unwrap()),
        _ => Literal::from(format!("n{}", rng.gen_range(0..n.max(1)))),
    }
}

/// Random linear query with 0–2 hops over the vocabulary of [`random_graph`].
pub fn random_query<R: Rng>(rng: &mut R, n: usize) -> QueryAst {
    let hops = rng.gen_range(0..=2);
    let vars: Vec<String> = (0..=hops).map(|i| format!("v{i}")).collect();
    let node = |rng: &mut R, var: &str| {
        let label = rng.gen_bool(0.6).then(|| *LABELS.choose(rng).unwrap());
        NodePattern::new(var, label)
    };
    let start = node(rng, &vars[0]);
    let hops: Vec<(EdgePattern, NodePattern)> = vars[1..]
        .iter()
        .map(|v| {
            (
                EdgePattern {
                    rel: RELS.choose(rng).unwrap().to_string(),
                },
                node(rng, v),
            )
        })
        .collect();
    let props = ["p", "q", "id"];
    let filters = (0..rng.gen_range(0..=2))
        .map(|_| {
            let property = *props.choose(rng).unwrap();
            Predicate {
                var: vars.choose(rng).unwrap().clone(),
                property: property.to_string(),
                value: random_literal(rng, property, n),
            }
        })
        .collect();
    let returns = (0..rng.gen_range(1..=3))
        .map(|_| Projection {
            var: vars.choose(rng).unwrap().clone(),
            property: props.choose(rng).unwrap().to_string(),
        })
        .collect();
    QueryAst {
        start,
        hops,
        filters,
        returns,
    }
}

fn lookup(node: &ChronicleNode, property: &str) -> Option<Literal> {
    match node.properties.get(property) {
        Some(v) => Some(v.clone()),
        None if property == "id" => Some(Literal::from(node.id.as_str())),
        None => None,
    }
}

/// Reference executor: enumerates every chain of edges matching the hop
/// relationships, keeps distinct node tuples, then applies labels, filters
/// and projections literally. Rows are `(node ids, values)` in id order.
pub fn oracle_execute(graph: &ChronicleGraph, ast: &QueryAst) -> Vec<(Vec<String>, Vec<Literal>)> {
    let mut tuples: BTreeSet<Vec<String>> = BTreeSet::new();
    if ast.hops.is_empty() {
        tuples.extend(graph.nodes().map(|n| vec![n.id.clone()]));
    } else {
        let mut chains: Vec<Vec<&ChronicleEdge>> = graph
            .edges()
            .iter()
            .filter(|e| e.rel == ast.hops[0].0.rel)
            .map(|e| vec![e])
            .collect();
        for (edge, _) in &ast.hops[1..] {
            chains = chains
                .into_iter()
                .flat_map(|chain| {
                    let last = chain.last().unwrap().to.clone();
                    graph
                        .edges()
                        .iter()
                        .filter(move |e| e.rel == edge.rel && e.from == last)
                        .map(move |e| {
                            let mut c = chain.clone();
                            c.push(e);
                            c
                        })
                })
                .collect();
        }
        for chain in chains {
            let mut ids = vec![chain[0].from.clone()];
            ids.extend(chain.iter().map(|e| e.to.clone()));
            tuples.insert(ids);
        }
    }

    let patterns: Vec<&NodePattern> = ast.nodes().collect();
    let mut rows = Vec::new();
    'tuple: for ids in tuples {
        let nodes: Vec<&ChronicleNode> = ids.iter().map(|id| graph.node(id).unwrap()).collect();
        for (pat, node) in patterns.iter().zip(&nodes) {
            if let Some(label) = &pat.label {
                if !node.labels.contains(label) {
                    continue 'tuple;
                }
            }
        }
        let at = |var: &str| nodes[patterns.iter().position(|p| p.var == var).unwrap()];
        for f in &ast.filters {
            if lookup(at(&f.var), &f.property).as_ref() != Some(&f.value) {
                continue 'tuple;
            }
        }
        let mut values = Vec::new();
        for r in &ast.returns {
            match lookup(at(&r.var), &r.property) {
                Some(v) => values.push(v),
                None => continue 'tuple,
            }
        }
        rows.push((ids, values));
    }
    rows
}

/// 200 distinct pronounceable words.
pub fn lexicon() -> Vec<String> {
    let onsets = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    let vowels = ["a", "e", "i", "o", "u"];
    let mut words = Vec::new();
    'outer: for o1 in onsets {
        for v1 in vowels {
            for o2 in ["l", "r", "n"] {
                words.push(format!("{o1}{v1}{o2}o"));
                if words.len() == 200 {
                    break 'outer;
                }
            }
        }
    }
    words
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v: Vec3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub struct Scene {
    pub anchors: Vec<AnchorPoint>,
    pub user: UserPose,
    pub reference: SymbolicReference,
}

/// Up to `max_anchors` anchors with 1–5 word descriptions drawn from a small
/// per-scene vocabulary (so matches are common), scattered around a randomly
/// posed user. The reference reuses scene words, sometimes with qualifiers.
pub fn random_scene<R: Rng>(rng: &mut R, words: &[String], max_anchors: usize) -> Scene {
    let vocab: Vec<&String> = words.choose_multiple(rng, 12).collect();
    let n = rng.gen_range(1..=max_anchors);
    let center = [rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0), rng.gen_range(-3.0..3.0)];
    let mut anchors: Vec<AnchorPoint> = (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=5);
            let desc: Vec<&str> = (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect();
            let pos = [
                center[0] + rng.gen_range(-7.0..7.0),
                center[1] + rng.gen_range(-2.0..2.0),
                center[2] + rng.gen_range(-7.0..7.0),
            ];
            AnchorPoint::new(format!("anchor_{i:02}"), pos, desc.join(" "))
        })
        .collect();
    if n > 1 && rng.gen_bool(0.2) {
        // exact duplicate description exercises the tie rule
        anchors[1].description = anchors[0].description.clone();
    }
    anchors.shuffle(rng);
    let len = rng.gen_range(1..=3);
    let mut sr: Vec<&str> = (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect();
    if rng.gen_bool(0.5) {
        sr.extend(["in", "front"]);
    }
    Scene {
        anchors,
        user: UserPose::new(center, random_unit(rng)),
        reference: SymbolicReference::new(sr.join("_")).unwrap(),
    }
}

/// Literal application of the anchor-resolution definitions.
pub enum OracleAnchor {
    Chosen(String),
    NoSemanticMatch,
    NothingInFront,
}

pub fn oracle_resolve(scene: &Scene, cfg: &ReasonerConfig) -> OracleAnchor {
    const EPS: f64 = 1e-12;
    let text = scene.reference.semantic_text();
    let scored: Vec<(&AnchorPoint, f64)> = scene
        .anchors
        .iter()
        .map(|a| (a, semantic_similarity(&text, &a.description).value()))
        .collect();
    let ap_sem: Vec<&(&AnchorPoint, f64)> = scored
        .iter()
        .filter(|(_, s)| *s >= cfg.similarity_threshold - EPS)
        .collect();
    if ap_sem.is_empty() {
        return OracleAnchor::NoSemanticMatch;
    }
    let c = scene.user.center;
    let f = scene.user.facing;
    let ap_front: Vec<&&(&AnchorPoint, f64)> = ap_sem
        .iter()
        .filter(|(a, _)| {
            let d = [a.position[0] - c[0], a.position[1] - c[1], a.position[2] - c[2]];
            let along = d[0] * f[0] + d[1] * f[1] + d[2] * f[2];
            along > 0.0 && (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() <= cfg.max_front_distance
        })
        .collect();
    let Some(max) = ap_front.iter().map(|(_, s)| *s).reduce(f64::max) else {
        return OracleAnchor::NothingInFront;
    };
    let winner = ap_front
        .iter()
        .filter(|(_, s)| *s >= max - EPS)
        .map(|(a, _)| a.id.clone())
        .min()
        .unwrap();
    OracleAnchor::Chosen(winner)
}
