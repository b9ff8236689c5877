//! Spatial and ontological grounding of symbolic references on anchors.

use serde::Serialize;

use super::{ReasonerConfig, ReasoningError};
use crate::embedding::{similarity_with, tokenize, Embedder, HashedBagEmbedder, SimilarityScore, SIMILARITY_SLACK};
use crate::scene::{in_front, norm, AnchorPoint, UserPose};
use crate::synthesizer::MediaKind;

/// Relational words that locate a thing relative to the user rather than
/// describe it; geometry handles them, so they are dropped before matching.
pub const SPATIAL_QUALIFIERS: &[&str] = &[
    "in", "front", "of", "me", "my", "behind", "left", "right", "to", "the", "on", "at", "near",
    "next", "beside", "above", "below", "under", "over",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolicReference {
    text: String,
}

impl SymbolicReference {
    pub fn new(text: impl Into<String>) -> Result<Self, ReasoningError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ReasoningError::EmptyReference);
        }
        Ok(SymbolicReference { text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// The descriptive part: `table_in_front` → `table`. Falls back to all
    /// tokens when every token is a qualifier.
    pub fn semantic_text(&self) -> String {
        let tokens = tokenize(&self.text);
        let kept: Vec<&str> = tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !SPATIAL_QUALIFIERS.contains(t))
            .collect();
        if kept.is_empty() {
            tokens.join(" ")
        } else {
            kept.join(" ")
        }
    }
}

/// What a visualization of `kind` needs from its surface when the request
/// names no location.
pub fn default_surface_need(kind: MediaKind) -> &'static str {
    match kind {
        MediaKind::PieChart => "surface for presenting data",
        MediaKind::PhotoFrame => "photo frame for emotional memories",
        MediaKind::TextPanel => "surface for presenting text",
    }
}

/// Every intermediate set of anchor resolution, for traces and tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorDiagnostics {
    pub reference: String,
    pub semantic_text: String,
    pub threshold: f64,
    /// `(anchor, similarity)` for all anchors, in input order.
    pub scores: Vec<(String, SimilarityScore)>,
    pub ap_sem: Vec<String>,
    pub ap_front: Vec<String>,
    pub chosen: Option<String>,
}

pub fn resolve_anchor_diagnostics(
    embedder: &dyn Embedder,
    sr: &SymbolicReference,
    anchors: &[AnchorPoint],
    user: &UserPose,
    cfg: &ReasonerConfig,
) -> AnchorDiagnostics {
    let text = sr.semantic_text();
    let theta = cfg.similarity_threshold;
    let scores: Vec<(String, SimilarityScore)> = anchors
        .iter()
        .map(|a| (a.id.clone(), similarity_with(embedder, &text, &a.description)))
        .collect();
    let ap_sem: Vec<usize> = (0..anchors.len())
        .filter(|&i| scores[i].1.value() >= theta - SIMILARITY_SLACK)
        .collect();
    let ap_front: Vec<usize> = ap_sem
        .iter()
        .copied()
        .filter(|&i| in_front(user, anchors[i].position, cfg.max_front_distance))
        .collect();

    // argmax; scores within the slack count as tied, ties go to the smallest id
    let mut best: Option<usize> = None;
    for &i in &ap_front {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (si, sb) = (scores[i].1.value(), scores[b].1.value());
                if si > sb + SIMILARITY_SLACK
                    || ((si - sb).abs() <= SIMILARITY_SLACK && anchors[i].id < anchors[b].id)
                {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }

    AnchorDiagnostics {
        reference: sr.text().to_string(),
        semantic_text: text,
        threshold: theta,
        ap_sem: ap_sem.iter().map(|&i| anchors[i].id.clone()).collect(),
        ap_front: ap_front.iter().map(|&i| anchors[i].id.clone()).collect(),
        chosen: best.map(|i| anchors[i].id.clone()),
        scores,
    }
}

/// `argmax_{ap ∈ AP_front} sim(sr, ap)` where `AP_sem` keeps anchors with
/// similarity ≥ θ and `AP_front` keeps those in front of the user.
pub fn resolve_anchor(
    sr: &SymbolicReference,
    anchors: &[AnchorPoint],
    user: &UserPose,
    cfg: &ReasonerConfig,
) -> Result<String, ReasoningError> {
    resolve_anchor_with(&HashedBagEmbedder::default(), sr, anchors, user, cfg).map(|d| {
        d.chosen.expect("resolution succeeded")
    })
}

/// Like [`resolve_anchor`] but returns the diagnostics of a successful run.
pub fn resolve_anchor_with(
    embedder: &dyn Embedder,
    sr: &SymbolicReference,
    anchors: &[AnchorPoint],
    user: &UserPose,
    cfg: &ReasonerConfig,
) -> Result<AnchorDiagnostics, ReasoningError> {
    if anchors.is_empty() {
        return Err(ReasoningError::NoAnchors);
    }
    if norm(user.facing) == 0.0 {
        return Err(ReasoningError::ZeroFacing);
    }
    let d = resolve_anchor_diagnostics(embedder, sr, anchors, user, cfg);
    if d.ap_sem.is_empty() {
        let best = d
            .scores
            .iter()
            .map(|(_, s)| s.value())
            .fold(f64::NEG_INFINITY, f64::max);
        return Err(ReasoningError::NoSemanticMatch {
            reference: sr.text().to_string(),
            best,
            threshold: cfg.similarity_threshold,
        });
    }
    if d.chosen.is_none() {
        return Err(ReasoningError::NothingInFront {
            candidates: d.ap_sem.clone(),
        });
    }
    Ok(d)
}

/// Anchors whose description affords `need`, best first (ties by id).
/// Pose-independent.
pub fn infer_affordance(
    need: &str,
    anchors: &[AnchorPoint],
    cfg: &ReasonerConfig,
) -> Vec<(String, SimilarityScore)> {
    infer_affordance_with(&HashedBagEmbedder::default(), need, anchors, cfg)
}

pub fn infer_affordance_with(
    embedder: &dyn Embedder,
    need: &str,
    anchors: &[AnchorPoint],
    cfg: &ReasonerConfig,
) -> Vec<(String, SimilarityScore)> {
    let mut ranked: Vec<(String, SimilarityScore)> = anchors
        .iter()
        .map(|a| (a.id.clone(), similarity_with(embedder, need, &a.description)))
        .filter(|(_, s)| s.value() >= cfg.similarity_threshold - SIMILARITY_SLACK)
        .collect();
    ranked.sort_by(|a, b| b.1.value().total_cmp(&a.1.value()).then_with(|| a.0.cmp(&b.0)));
    ranked
}
