//! One client's session: its scene, Chronicle handle and attention tracker,
//! and the two pipelines that turn prompts and signal batches into outbound
//! envelopes.
//!
//! Both pipelines are transactional: every fallible stage runs against
//! borrowed or cloned state, and the scene, tracker and Chronicle are only
//! committed once nothing can fail any more.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use pair_core::chronicle::{ChronicleGraph, ChronicleHandle, QueryResult, Triple};
use pair_core::monitor::{detect, propose_update, validate_batch, AttentionTracker, Signal, SignalKind};
use pair_core::query::execute;
use pair_core::reasoner::{
    align_nodes, default_surface_need, extract_entities_relations, formulate_query,
    formulate_retrieval, infer_affordance, resolve_anchor_with, select_emotional_goal,
    EmotionalGoal, ReasoningMode, ReasoningPlan, RetrievalIntent, SchemaTable, SymbolicReference,
    RETRIEVE_MEMORY,
};
use pair_core::embedding::HashedBagEmbedder;
use pair_core::scene::{RuntimeEvent, SceneState};
use pair_core::scribe::{interpret_signals, ParseRequest, SituationGraph, TranslatorBackend};
use pair_core::synthesizer::{
    synthesize_generated, synthesize_pie, synthesize_retrieval, MediaKind, MediaObject,
    SpendingRecord,
};
use serde_json::{json, Value};

use crate::config::ServiceConfig;
use crate::protocol::{Envelope, MessageType};

/// A failed pipeline stage, reported as a single error envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl StageError {
    pub fn new(stage: &'static str, message: impl std::fmt::Display) -> Self {
        StageError {
            stage,
            message: message.to_string(),
        }
    }
}

fn at<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> StageError {
    move |e| StageError::new(stage, e)
}

fn now_seconds() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

/// Number of aligned nodes a `describe` request conditions on.
const DESCRIBE_NODES: usize = 3;

pub struct Session {
    id: String,
    scene: SceneState,
    chronicle: ChronicleHandle,
    requester: String,
    app_goal: Option<String>,
    tracker: AttentionTracker,
    config: ServiceConfig,
    schema: SchemaTable,
    translator: Arc<dyn TranslatorBackend>,
    out_seq: u64,
    situations: u64,
}

/// Everything a successful placement produces before it is committed.
struct Placed {
    scene: SceneState,
    event: RuntimeEvent,
    trace: Vec<Value>,
}

impl Session {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: String,
        scene: SceneState,
        chronicle: ChronicleHandle,
        requester: String,
        app_goal: Option<String>,
        config: ServiceConfig,
        schema: SchemaTable,
        translator: Arc<dyn TranslatorBackend>,
    ) -> Self {
        let tracker = AttentionTracker::new(config.monitor.dwell_threshold);
        Session {
            id,
            scene,
            chronicle,
            requester,
            app_goal,
            tracker,
            config,
            schema,
            translator,
            out_seq: 0,
            situations: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scene(&self) -> &SceneState {
        &self.scene
    }

    pub fn chronicle(&self) -> &ChronicleHandle {
        &self.chronicle
    }

    pub fn tracker(&self) -> &AttentionTracker {
        &self.tracker
    }

    pub fn envelope(&mut self, kind: MessageType, payload: Value) -> Envelope {
        self.out_seq += 1;
        Envelope::new(kind, self.id.clone(), self.out_seq, payload)
    }

    pub fn error(&mut self, e: StageError) -> Envelope {
        self.out_seq += 1;
        Envelope::error(self.id.clone(), self.out_seq, e.stage, e.message)
    }

    pub fn snapshot(&mut self) -> Envelope {
        let snap = self.scene.snapshot();
        self.envelope(MessageType::Snapshot, snap)
    }

    fn next_situation(&mut self) -> String {
        self.situations += 1;
        format!("situation_{}", self.situations)
    }

    /// Prompt → situation → plan → query → media → event → scene.
    /// Emits `event_out`, `snapshot`, `reasoning_trace`, or one `error`.
    pub fn handle_prompt(&mut self, text: &str) -> Vec<Envelope> {
        let situation_id = self.next_situation();
        let graph = self.chronicle.snapshot();
        match self.run_prompt(text, &situation_id, &graph) {
            Ok(placed) => {
                self.scene = placed.scene;
                vec![
                    self.envelope(MessageType::EventOut, placed.event.to_json()),
                    self.snapshot(),
                    self.envelope(
                        MessageType::ReasoningTrace,
                        json!({ "situation_id": situation_id, "steps": placed.trace }),
                    ),
                ]
            }
            Err(e) => vec![self.error(e)],
        }
    }

    fn run_prompt(&self, text: &str, situation_id: &str, graph: &ChronicleGraph) -> Result<Placed, StageError> {
        let cfg = &self.config.reasoner;
        let mut trace = Vec::new();

        let request = ParseRequest::new(situation_id, text).with_spatial(self.scene.spatial().clone());
        let situation = self.translator.parse(&request).map_err(at("scribe"))?;
        trace.push(json!({ "stage": "scribe", "situation": situation }));

        let ex = extract_entities_relations(&situation);
        let aligned = align_nodes(&situation, graph, cfg);
        trace.push(json!({ "stage": "extraction", "entities": ex.entities, "relations": ex.relations }));
        trace.push(json!({
            "stage": "alignment",
            "nodes": aligned.iter().map(|(id, s)| json!({ "node": id, "similarity": s.value() })).collect::<Vec<_>>(),
        }));

        let intent = situation.first("has_intent").unwrap_or_default().to_string();
        let (query, kind) = match intent.as_str() {
            "visualize_spending_profile" => (
                formulate_query(&ex, &aligned, graph, &self.schema, &self.requester).map_err(at("reasoner"))?,
                MediaKind::PieChart,
            ),
            RETRIEVE_MEMORY => {
                let ri = RetrievalIntent {
                    goal: RETRIEVE_MEMORY.to_string(),
                    sentiment: "positive".to_string(),
                    context: None,
                    candidates: Vec::new(),
                    theme: None,
                };
                (formulate_retrieval(&ri, &self.schema).map_err(at("reasoner"))?, MediaKind::PhotoFrame)
            }
            "describe" => (
                formulate_query(&ex, &aligned, graph, &self.schema, &self.requester).map_err(at("reasoner"))?,
                MediaKind::TextPanel,
            ),
            other => return Err(StageError::new("reasoner", format!("no plan for intent `{other}`"))),
        };

        let (anchor, mode, anchor_trace) = self.place(kind, situation.first("has_target_location"))?;
        trace.push(anchor_trace);

        let plan = ReasoningPlan::new(BTreeSet::from([mode]), query, Some(anchor), Some(intent.clone()))
            .map_err(at("reasoner"))?;
        let rows = execute(&plan.query, graph);
        trace.push(plan_trace(&plan, &rows));

        let media = match kind {
            MediaKind::PieChart => SpendingRecord::from_result(&rows).and_then(|r| synthesize_pie(&r)),
            MediaKind::PhotoFrame => synthesize_retrieval(&rows, graph),
            MediaKind::TextPanel => {
                let condition: Vec<String> = rows
                    .rows
                    .iter()
                    .filter_map(|r| r.nodes.last().cloned())
                    .take(DESCRIBE_NODES)
                    .collect();
                synthesize_generated(graph, &condition, &intent)
            }
        }
        .map_err(at("synthesizer"))?;
        trace.push(media_trace(&media));

        let anchor = plan.anchor.expect("plan carries its anchor");
        self.render_and_place(&media, &anchor, trace)
    }

    /// Picks the anchor for a new visualization: a named location is resolved
    /// spatially; otherwise frames go by affordance and everything else by the
    /// surface it needs, in front of the user.
    fn place(&self, kind: MediaKind, location: Option<&str>) -> Result<(String, ReasoningMode, Value), StageError> {
        let cfg = &self.config.reasoner;
        let anchors = self.scene.anchors();
        if location.is_none() && kind == MediaKind::PhotoFrame {
            let need = default_surface_need(kind);
            let ranked = infer_affordance(need, anchors, cfg);
            let trace = json!({
                "stage": "infer_affordance",
                "need": need,
                "ranked": ranked.iter().map(|(id, s)| json!({ "anchor": id, "similarity": s.value() })).collect::<Vec<_>>(),
            });
            let (best, _) = ranked
                .first()
                .ok_or_else(|| StageError::new("infer_affordance", format!("no anchor affords `{need}`")))?;
            return Ok((best.clone(), ReasoningMode::Ontological, trace));
        }
        let text = location.unwrap_or_else(|| default_surface_need(kind));
        let sr = SymbolicReference::new(text).map_err(at("resolve_anchor"))?;
        let d = resolve_anchor_with(&HashedBagEmbedder::default(), &sr, anchors, self.scene.user(), cfg)
            .map_err(at("resolve_anchor"))?;
        let chosen = d.chosen.clone().expect("resolution succeeded");
        let mut trace = serde_json::to_value(&d).expect("diagnostics serialize");
        trace["stage"] = json!("resolve_anchor");
        Ok((chosen, ReasoningMode::Spatial, trace))
    }

    fn render_and_place(&self, media: &MediaObject, anchor: &str, mut trace: Vec<Value>) -> Result<Placed, StageError> {
        let event = self.translator.render(media, anchor).map_err(at("render"))?;
        let mut scene = self.scene.clone();
        let placement = scene.apply_event(event.clone()).map_err(at("scene"))?;
        trace.push(json!({ "stage": "scene", "placement": placement }));
        Ok(Placed { scene, event, trace })
    }

    /// Signals → detected states and attention → (optionally) an emotional
    /// recall placed in the scene → Chronicle update. A batch that matches
    /// no rule and crosses no dwell threshold produces no envelopes.
    pub fn handle_signals(&mut self, signals: &[Signal]) -> Vec<Envelope> {
        match self.run_signals(signals) {
            Ok(out) => out,
            Err(e) => vec![self.error(e)],
        }
    }

    fn run_signals(&mut self, signals: &[Signal]) -> Result<Vec<Envelope>, StageError> {
        validate_batch(signals).map_err(at("monitor"))?;
        // validated and recorded, but no rule reads heart rate
        for s in signals.iter().filter(|s| s.kind == SignalKind::HeartRate) {
            log::debug!("{}: heart rate {:?} at t={}", self.id, s.value, s.t);
        }
        let monitor = self.config.monitor.clone();
        let states = detect(signals, monitor.dwell_threshold);
        let mut tracker = self.tracker.clone();
        let attention = tracker.track(signals);

        let mut trace = vec![json!({ "stage": "monitor", "states": states, "attention": attention })];
        let mut placed = None;
        let mut situation_id = None;

        if !states.is_empty() {
            let sid = self.next_situation();
            let situation = interpret_signals(&sid, &states).map_err(at("scribe"))?;
            trace.push(json!({ "stage": "scribe", "situation": situation }));
            if let Some(goal) = self.app_goal.clone() {
                let graph = self.chronicle.snapshot();
                placed = self.run_emotional(&situation, &goal, &graph, &mut trace)?;
            }
            situation_id = Some(sid);
        }

        let mut updates: Vec<Triple> = Vec::new();
        for t in attention.into_iter().chain(propose_update(&states, monitor.min_confidence)) {
            if !updates.contains(&t) {
                updates.push(t);
            }
        }

        // Nothing below can fail: commit.
        self.tracker = tracker;
        let mut out = Vec::new();
        if let Some(p) = placed {
            self.scene = p.scene;
            trace.extend(p.trace);
            out.push(self.envelope(MessageType::EventOut, p.event.to_json()));
            out.push(self.snapshot());
        }
        if !updates.is_empty() {
            let ts = now_seconds();
            let report = self.chronicle.write().apply_update(&updates, "monitor", ts);
            out.push(self.envelope(
                MessageType::ChronicleUpdate,
                json!({ "materialized": report.materialized, "logged_only": report.logged_only, "ts": ts }),
            ));
        }
        if !out.is_empty() || situation_id.is_some() {
            out.push(self.envelope(
                MessageType::ReasoningTrace,
                json!({ "situation_id": situation_id, "steps": trace }),
            ));
        }
        Ok(out)
    }

    fn run_emotional(
        &self,
        situation: &SituationGraph,
        goal: &str,
        graph: &ChronicleGraph,
        trace: &mut Vec<Value>,
    ) -> Result<Option<Placed>, StageError> {
        let decision = select_emotional_goal(situation, goal, graph).map_err(at("reasoner"))?;
        trace.push(json!({ "stage": "emotional_goal", "app_goal": goal, "decision": decision }));
        let EmotionalGoal::RetrieveMemory(intent) = decision else {
            return Ok(None);
        };
        let query = formulate_retrieval(&intent, &self.schema).map_err(at("reasoner"))?;
        let (anchor, mode, anchor_trace) = self.place(MediaKind::PhotoFrame, None)?;
        trace.push(anchor_trace);
        let mut modes = BTreeSet::from([ReasoningMode::Thematic, mode]);
        if intent.theme.is_none() {
            modes.insert(ReasoningMode::Temporal);
        }
        let plan = ReasoningPlan::new(modes, query, Some(anchor.clone()), Some(intent.goal.clone()))
            .map_err(at("reasoner"))?;
        let rows = execute(&plan.query, graph);
        trace.push(plan_trace(&plan, &rows));
        if rows.is_empty() {
            // nothing to recall: the scene stays as it is
            return Ok(None);
        }
        let media = synthesize_retrieval(&rows, graph).map_err(at("synthesizer"))?;
        trace.push(media_trace(&media));
        self.render_and_place(&media, &anchor, Vec::new()).map(Some)
    }
}

fn plan_trace(plan: &ReasoningPlan, rows: &QueryResult) -> Value {
    json!({
        "stage": "query",
        "modes": plan.modes,
        "goal": plan.goal,
        "anchor": plan.anchor,
        "query": plan.query.to_string(),
        "rows": rows.rows.len(),
    })
}

fn media_trace(media: &MediaObject) -> Value {
    json!({ "stage": "synthesizer", "media": media })
}
