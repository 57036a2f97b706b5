//! JSON session service. Each session's mutations run one at a time behind
//! its own lock; different sessions proceed concurrently.
//!
//! State responses include simulator ground truth next to the detections.
//! A deployment on a real robot would have no truth to report.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use tgg_core::engine::{ActionPlan, EngineConfig, EngineError, Models, PendingFact, ScenarioSession, TraceEvent};
use tgg_core::facts::BeliefEntry;
use tgg_core::sim::{DetectionFrame, Scenario, TruthObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    /// Showcase name, or `inline` for a posted scenario.
    pub scenario: String,
}

/// A scenario posted inline or named by showcase.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Name(String),
    Inline(Box<Scenario>),
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub scenario: ScenarioRef,
}

/// Mutations may name the trace length they were issued against; a
/// mismatch means another client changed the session first.
#[derive(Debug, Deserialize)]
pub struct UtteranceRequest {
    pub text: String,
    #[serde(default)]
    pub if_seq: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct StepRequest {
    pub ticks: usize,
    #[serde(default)]
    pub if_seq: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct TraceQuery {
    #[serde(default)]
    pub since: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub tick: u64,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateResponse {
    pub id: String,
    pub tick: u64,
    pub horizon: u64,
    pub finished: bool,
    pub objects: Vec<TruthObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<DetectionFrame>,
    pub beliefs: Vec<BeliefEntry>,
    pub pending: Vec<PendingFact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_plan: Option<ActionPlan>,
    /// Sequence number the next trace event will get.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResponse {
    pub events: Vec<TraceEvent>,
    /// Pass as `since` to get only newer events.
    pub next: u64,
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict { expected: u64, actual: u64 },
    BadRequest(String),
    Parse(String),
    Grounding(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "not-found", m),
            ApiError::Conflict { expected, actual } => (
                StatusCode::CONFLICT,
                "conflict",
                format!("session moved on: expected seq {expected}, now {actual}"),
            ),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad-request", m),
            ApiError::Parse(m) => (StatusCode::BAD_REQUEST, "parse", m),
            ApiError::Grounding(m) => (StatusCode::UNPROCESSABLE_ENTITY, "grounding", m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        };
        (status, Json(json!({ "error": message, "kind": kind }))).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Parse(_) => ApiError::Parse(e.to_string()),
            EngineError::Sim(_) | EngineError::Model(_) => ApiError::BadRequest(e.to_string()),
            _ => ApiError::Grounding(e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

struct Entry {
    handle: SessionHandle,
    run: ScenarioSession,
}

impl Entry {
    fn seq(&self) -> u64 {
        self.run.session().trace().len() as u64
    }

    fn check(&self, if_seq: Option<u64>) -> Result<(), ApiError> {
        match if_seq {
            Some(expected) if expected != self.seq() => Err(ApiError::Conflict {
                expected,
                actual: self.seq(),
            }),
            _ => Ok(()),
        }
    }

    fn state(&self) -> StateResponse {
        let s = self.run.session();
        let tick = s.last_tick().unwrap_or(0);
        StateResponse {
            id: self.handle.id.clone(),
            tick,
            horizon: self.run.scenario().horizon(),
            finished: self.run.finished(),
            objects: self
                .run
                .frames()
                .get(tick as usize)
                .map(|f| f.truth.objects.clone())
                .unwrap_or_default(),
            detections: s.detections().last().cloned(),
            beliefs: s.beliefs().entries(),
            pending: s.pending().to_vec(),
            last_plan: s.last_plan().cloned(),
            seq: self.seq(),
        }
    }
}

pub struct AppState {
    models: Arc<Models>,
    cfg: EngineConfig,
    next_id: AtomicU64,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
}

impl AppState {
    pub fn new(models: Arc<Models>, cfg: EngineConfig) -> Arc<Self> {
        Arc::new(Self {
            models,
            cfg,
            next_id: AtomicU64::new(1),
            sessions: RwLock::new(HashMap::new()),
        })
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }
}

/// Runs engine work off the async threads while holding the session lock,
/// so later requests for the same session queue behind it.
async fn with_entry<T: Send + 'static>(
    app: &AppState,
    id: &str,
    f: impl FnOnce(&mut Entry) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let mut guard = app.entry(id)?.lock_owned().await;
    tokio::task::spawn_blocking(move || f(&mut guard))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn create(State(app): State<Arc<AppState>>, body: Result<Json<CreateRequest>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let (name, scenario) = match req.scenario {
        ScenarioRef::Name(n) => {
            // names only reach built-in showcases, never the server's files
            let s = tgg_core::corpus::showcases()
                .into_iter()
                .find(|s| s.name == n)
                .ok_or_else(|| ApiError::BadRequest(format!("no showcase `{n}`")))?;
            (n, s.scenario)
        }
        ScenarioRef::Inline(s) => ("inline".to_string(), *s),
    };
    let models = app.models.clone();
    let cfg = app.cfg;
    let run = tokio::task::spawn_blocking(move || ScenarioSession::new(scenario, models, cfg))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let handle = SessionHandle {
        id: format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed)),
        created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        scenario: name,
    };
    let body = serde_json::to_value(&handle).expect("handle serializes");
    app.sessions
        .write()
        .expect("session map lock")
        .insert(handle.id.clone(), Arc::new(Mutex::new(Entry { handle, run })));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list(State(app): State<Arc<AppState>>) -> Json<Vec<SessionHandle>> {
    let entries: Vec<_> = app.sessions.read().expect("session map lock").values().cloned().collect();
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        out.push(e.lock().await.handle.clone());
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

/// The body is the engine's own serialization of the result.
async fn utterance(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<UtteranceRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let json = with_entry(&app, &id, move |e| {
        e.check(req.if_seq)?;
        Ok(e.run.ground(&req.text)?.to_json())
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

async fn step(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<StepRequest>, JsonRejection>,
) -> Result<Json<StepResponse>, ApiError> {
    let Json(req) = body?;
    let r = with_entry(&app, &id, move |e| {
        e.check(req.if_seq)?;
        e.run.step(req.ticks)?;
        Ok(StepResponse {
            tick: e.run.session().last_tick().unwrap_or(0),
            finished: e.run.finished(),
        })
    })
    .await?;
    Ok(Json(r))
}

async fn state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<StateResponse>, ApiError> {
    let entry = app.entry(&id)?;
    let e = entry.lock().await;
    Ok(Json(e.state()))
}

async fn trace(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<TraceQuery>, QueryRejection>,
) -> Result<Json<TraceResponse>, ApiError> {
    let Query(q) = q?;
    let entry = app.entry(&id)?;
    let e = entry.lock().await;
    let all = e.run.session().trace();
    let from = (q.since as usize).min(all.len());
    Ok(Json(TraceResponse {
        events: all[from..].to_vec(),
        next: all.len() as u64,
    }))
}

async fn fallback() -> ApiError {
    ApiError::NotFound("no such route".into())
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create).get(list))
        .route("/api/sessions/{id}/utterance", post(utterance))
        .route("/api/sessions/{id}/step", post(step))
        .route("/api/sessions/{id}/state", get(state))
        .route("/api/sessions/{id}/trace", get(trace))
        .fallback(fallback)
        .with_state(app)
}

/// Serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, app: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app)).await
}
