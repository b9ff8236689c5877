//! Session registry over a shared, consent-gated Chronicle pool.
//!
//! Each client gets a [`Connection`]; sessions belong to the connection that
//! created them and disappear with it. Sessions run independently: a session
//! is locked only while it handles one of its own messages.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use pair_core::chronicle::{load_chronicle, save_chronicle, ChronicleError, ChronicleGraph, ChroniclePool};
use pair_core::monitor::Signal;
use pair_core::reasoner::SchemaTable;
use pair_core::scene::{init_scene, SpatialData};
use pair_core::scribe::{RuleBasedTranslator, TranslatorBackend};
use serde::Deserialize;
use serde_json::Value;

use crate::config::ServiceConfig;
use crate::protocol::{Envelope, MessageType};
use crate::session::{Session, StageError};

/// File in a pool directory mapping each owner to the requesters they consent to.
pub const CONSENT_FILE: &str = "consent.json";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("reading pool directory {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Chronicle {
        path: String,
        source: ChronicleError,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InitPayload {
    spatial: SpatialData,
    chronicle: String,
    #[serde(default)]
    requester: Option<String>,
    #[serde(default)]
    app_goal: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptPayload {
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalPayload {
    signals: Vec<Signal>,
}

struct Slot {
    client: u64,
    session: Arc<Mutex<Session>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub struct Service {
    pool: ChroniclePool,
    schemas: Mutex<BTreeMap<String, SchemaTable>>,
    paths: Mutex<BTreeMap<String, PathBuf>>,
    config: ServiceConfig,
    translator: Arc<dyn TranslatorBackend>,
    sessions: Mutex<BTreeMap<String, Slot>>,
    clients: AtomicU64,
    session_ids: AtomicU64,
}

impl Service {
    pub fn new(config: ServiceConfig, translator: Arc<dyn TranslatorBackend>) -> Arc<Self> {
        Arc::new(Service {
            pool: ChroniclePool::new(),
            schemas: Mutex::default(),
            paths: Mutex::default(),
            config,
            translator,
            sessions: Mutex::default(),
            clients: AtomicU64::new(0),
            session_ids: AtomicU64::new(0),
        })
    }

    pub fn with_rules(config: ServiceConfig) -> Arc<Self> {
        Self::new(config, Arc::new(RuleBasedTranslator))
    }

    pub fn pool(&self) -> &ChroniclePool {
        &self.pool
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Registers a Chronicle. With `path`, every update is written back there.
    pub fn add_chronicle<I, S>(&self, graph: ChronicleGraph, consent: I, schema: SchemaTable, path: Option<PathBuf>)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let owner = graph.owner().to_string();
        lock(&self.schemas).insert(owner.clone(), schema);
        if let Some(p) = path {
            lock(&self.paths).insert(owner, p);
        }
        self.pool.insert(graph, consent);
    }

    /// Loads every `*.json` Chronicle in `dir` (except the consent file and
    /// schema sidecars), with its schema sidecar when present and the
    /// grants listed in `consent.json`. Updates persist to the same files.
    pub fn load_pool_dir(&self, dir: &Path) -> Result<(), ServiceError> {
        let io = |source| ServiceError::Io {
            path: dir.display().to_string(),
            source,
        };
        let consent_path = dir.join(CONSENT_FILE);
        let consent: BTreeMap<String, Vec<String>> = if consent_path.exists() {
            let text = std::fs::read_to_string(&consent_path).map_err(io)?;
            serde_json::from_str(&text).map_err(|e| ServiceError::Invalid {
                path: consent_path.display().to_string(),
                message: e.to_string(),
            })?
        } else {
            BTreeMap::new()
        };

        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                name.ends_with(".json") && name != CONSENT_FILE && !name.ends_with(".schema.json")
            })
            .collect();
        files.sort();
        for path in files {
            let graph = load_chronicle(&path).map_err(|source| ServiceError::Chronicle {
                path: path.display().to_string(),
                source,
            })?;
            let schema = SchemaTable::for_chronicle(&path).map_err(|e| ServiceError::Invalid {
                path: SchemaTable::sidecar_path(&path).display().to_string(),
                message: e.to_string(),
            })?;
            let grants = consent.get(graph.owner()).cloned().unwrap_or_default();
            log::info!("loaded chronicle of {} from {}", graph.owner(), path.display());
            self.add_chronicle(graph, grants, schema, Some(path));
        }
        Ok(())
    }

    pub fn connect(self: &Arc<Self>) -> Connection {
        Connection {
            service: Arc::clone(self),
            client: self.clients.fetch_add(1, Ordering::Relaxed) + 1,
        }
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    fn init(&self, client: u64, env: Envelope) -> Vec<Envelope> {
        let requested = env.session_id.clone();
        let fail = |stage: &str, msg: String| vec![Envelope::error(requested.clone(), 0, stage, msg)];

        let payload: InitPayload = match serde_json::from_value(env.payload) {
            Ok(p) => p,
            Err(e) => return fail("init", format!("bad init payload: {e}")),
        };
        let requester = payload.requester.unwrap_or_else(|| payload.chronicle.clone());
        let handle = match self.pool.get(&payload.chronicle, &requester) {
            Ok(h) => h,
            Err(e) => return fail("consent", e.to_string()),
        };
        let scene = match init_scene(payload.spatial) {
            Ok(s) => s,
            Err(e) => return fail("init", e.to_string()),
        };
        let schema = lock(&self.schemas).get(&payload.chronicle).cloned().unwrap_or_default();

        let mut sessions = lock(&self.sessions);
        let id = if requested.is_empty() {
            loop {
                let n = self.session_ids.fetch_add(1, Ordering::Relaxed) + 1;
                let candidate = format!("session_{n}");
                if !sessions.contains_key(&candidate) {
                    break candidate;
                }
            }
        } else if sessions.contains_key(&requested) {
            return fail("init", format!("session `{requested}` already exists"));
        } else {
            requested.clone()
        };
        let mut session = Session::new(
            id.clone(),
            scene,
            handle,
            requester,
            payload.app_goal,
            self.config.clone(),
            schema,
            Arc::clone(&self.translator),
        );
        let ack = session.snapshot();
        sessions.insert(
            id,
            Slot {
                client,
                session: Arc::new(Mutex::new(session)),
            },
        );
        vec![ack]
    }

    fn dispatch(&self, client: u64, env: Envelope) -> Vec<Envelope> {
        if !env.kind.is_inbound() {
            return vec![Envelope::error(
                env.session_id,
                0,
                "protocol",
                format!("`{}` is not a client message", env.kind),
            )];
        }
        if env.kind == MessageType::InitSpatialData {
            return self.init(client, env);
        }

        let slot = lock(&self.sessions)
            .get(&env.session_id)
            .filter(|s| s.client == client)
            .map(|s| Arc::clone(&s.session));
        let Some(session) = slot else {
            return vec![Envelope::error(
                env.session_id.clone(),
                0,
                "protocol",
                format!("unknown session `{}`", env.session_id),
            )];
        };
        let mut session = lock(&session);
        let out = match env.kind {
            MessageType::UserPrompt => match serde_json::from_value::<PromptPayload>(env.payload) {
                Ok(p) => session.handle_prompt(&p.text),
                Err(e) => vec![session.error(StageError::new("protocol", format!("bad prompt payload: {e}")))],
            },
            MessageType::SignalBatch => match serde_json::from_value::<SignalPayload>(env.payload) {
                Ok(p) => session.handle_signals(&p.signals),
                Err(e) => vec![session.error(StageError::new("protocol", format!("bad signal payload: {e}")))],
            },
            MessageType::SnapshotRequest => vec![session.snapshot()],
            _ => unreachable!("inbound types handled above"),
        };
        if out.iter().any(|e| e.kind == MessageType::ChronicleUpdate) {
            self.persist(&session);
        }
        out
    }

    fn persist(&self, session: &Session) {
        let graph = session.chronicle().read();
        let Some(path) = lock(&self.paths).get(graph.owner()).cloned() else {
            return;
        };
        if let Err(e) = save_chronicle(&graph, &path) {
            log::warn!("persisting chronicle of {} to {}: {e}", graph.owner(), path.display());
        }
    }

    fn disconnect(&self, client: u64) {
        lock(&self.sessions).retain(|_, s| s.client != client);
    }
}

/// One client's view of the service.
pub struct Connection {
    service: Arc<Service>,
    client: u64,
}

impl Connection {
    pub fn send(&self, env: Envelope) -> Vec<Envelope> {
        self.service.dispatch(self.client, env)
    }

    /// Parses one inbound line; a malformed line gets a protocol error back.
    pub fn send_line(&self, line: &str) -> Vec<Envelope> {
        match Envelope::from_line(line) {
            Ok(env) => self.send(env),
            Err(e) => vec![Envelope::error("", 0, "protocol", format!("malformed envelope: {e}"))],
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.service.disconnect(self.client);
    }
}

/// Builds an `init_spatial_data` envelope.
pub fn init_envelope(session_id: &str, spatial: &SpatialData, chronicle: &str, requester: Option<&str>, app_goal: Option<&str>) -> Envelope {
    let mut payload = serde_json::json!({ "spatial": spatial, "chronicle": chronicle });
    if let Some(r) = requester {
        payload["requester"] = Value::from(r);
    }
    if let Some(g) = app_goal {
        payload["app_goal"] = Value::from(g);
    }
    Envelope::new(MessageType::InitSpatialData, session_id, 0, payload)
}
