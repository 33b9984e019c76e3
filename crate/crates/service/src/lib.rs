//! Session service for interactive play. One session wraps one episode;
//! concurrent requests on a session are serialized by its lock.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use arena_core::{
    create_episode, parse_action, ArenaError, Difficulty, EnvKind, Episode, EpisodeStatus, Observation, StepOutcome,
    TaskSpec, Trace,
};
use arena_curation::{sample_adhoc, SuiteProfile};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use uuid::Uuid;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self { status, error, message: message.into(), task_id: None }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<ArenaError> for ApiError {
    fn from(e: ArenaError) -> Self {
        match e {
            ArenaError::State(m) => ApiError::conflict(m),
            ArenaError::Protocol(_) | ArenaError::Config { .. } | ArenaError::Parse(_) => {
                ApiError::bad_request(e.to_string())
            }
            ArenaError::Capacity(_) | ArenaError::Generation(_) => ApiError::internal(e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Session {
    id: Uuid,
    episode: Episode,
    actor_tag: Option<String>,
    created_at: DateTime<Utc>,
    step_times: Vec<DateTime<Utc>>,
    last_active: Instant,
}

pub struct ServiceConfig {
    pub idle_timeout: Duration,
    /// Tier ranges and budgets for tasks requested by env, seed and tier.
    pub profile: SuiteProfile,
    /// When set, every finished episode's export is written to
    /// `<dir>/<session_id>.json`.
    pub trace_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { idle_timeout: DEFAULT_IDLE_TIMEOUT, profile: SuiteProfile::lite(), trace_dir: None }
    }
}

pub struct AppState {
    tasks: BTreeMap<String, Arc<TaskSpec>>,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>,
    config: ServiceConfig,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    pub fn new(tasks: impl IntoIterator<Item = TaskSpec>, config: ServiceConfig) -> SharedState {
        let tasks = tasks.into_iter().map(|t| (t.task_id.clone(), Arc::new(t))).collect();
        Arc::new(Self { tasks, sessions: RwLock::new(HashMap::new()), config })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    /// Drop sessions idle for longer than the timeout. Returns how many went.
    pub fn sweep_idle(&self, now: Instant) -> usize {
        let mut map = self.sessions.write().expect("session map lock");
        let before = map.len();
        map.retain(|_, s| {
            let s = s.lock().expect("session lock");
            now.saturating_duration_since(s.last_active) <= self.config.idle_timeout
        });
        before - map.len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let uuid = Uuid::parse_str(id).map_err(|_| ApiError::not_found(format!("no session '{id}'")))?;
        self.sessions
            .read()
            .expect("session map lock")
            .get(&uuid)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session '{id}'")))
    }
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskEntry {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub difficulty: Difficulty,
    pub step_budget: usize,
}

#[derive(Debug, Default, Deserialize)]
pub struct TaskFilter {
    pub env: Option<EnvKind>,
    pub tier: Option<Difficulty>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub task_id: Option<String>,
    pub env: Option<EnvKind>,
    pub seed: Option<u64>,
    pub tier: Option<Difficulty>,
    #[serde(default)]
    pub rules_revealed: bool,
    pub actor_tag: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StepRequest {
    /// Action in the environment's wire format.
    pub action: String,
}

/// What a client sees of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub task_id: String,
    pub env_kind: EnvKind,
    pub difficulty: Difficulty,
    pub step_budget: usize,
    pub rules_revealed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules_text: Option<String>,
    pub actor_tag: Option<String>,
    pub created_at: String,
    pub status: EpisodeStatus,
    pub done: bool,
    pub step_index: usize,
    pub remaining_steps: usize,
    pub observation: Observation,
}

impl SessionView {
    fn of(s: &Session) -> Self {
        let task = s.episode.task();
        let revealed = s.episode.rules_revealed();
        Self {
            session_id: s.id.to_string(),
            task_id: task.task_id.clone(),
            env_kind: task.env_kind,
            difficulty: task.difficulty,
            step_budget: task.step_budget,
            rules_revealed: revealed,
            rules_text: revealed.then(|| task.rules_text.clone()),
            actor_tag: s.actor_tag.clone(),
            created_at: timestamp(&s.created_at),
            status: s.episode.status(),
            done: s.episode.status().is_terminal(),
            step_index: s.episode.step_index(),
            remaining_steps: s.episode.remaining_steps(),
            observation: s.episode.observation(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepResponse {
    pub session_id: String,
    #[serde(flatten)]
    pub outcome: StepOutcome,
}

/// A finished or running episode as exported for analysis. `trace` is the
/// engine's own trace; the other fields are session bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceExport {
    pub session_id: String,
    pub actor_tag: Option<String>,
    pub created_at: String,
    pub step_timestamps: Vec<String>,
    pub trace: Trace,
}

impl TraceExport {
    fn of(s: &Session) -> Self {
        Self {
            session_id: s.id.to_string(),
            actor_tag: s.actor_tag.clone(),
            created_at: timestamp(&s.created_at),
            step_timestamps: s.step_times.iter().map(timestamp).collect(),
            trace: s.episode.trace().clone(),
        }
    }
}

async fn health(State(state): State<SharedState>) -> Json<Value> {
    Json(json!({"status": "ok", "tasks": state.tasks.len(), "sessions": state.session_count()}))
}

async fn list_tasks(
    State(state): State<SharedState>,
    filter: Result<Query<TaskFilter>, QueryRejection>,
) -> ApiResult<Vec<TaskEntry>> {
    let Query(filter) = filter?;
    let entries = state
        .tasks
        .values()
        .filter(|t| filter.env.is_none_or(|e| e == t.env_kind) && filter.tier.is_none_or(|d| d == t.difficulty))
        .map(|t| TaskEntry {
            task_id: t.task_id.clone(),
            env_kind: t.env_kind,
            difficulty: t.difficulty,
            step_budget: t.step_budget,
        })
        .collect();
    Ok(Json(entries))
}

fn resolve_task(state: &AppState, req: &CreateSession) -> Result<Arc<TaskSpec>, ApiError> {
    match (&req.task_id, req.env, req.seed) {
        (Some(id), None, None) => state.tasks.get(id).cloned().ok_or_else(|| ApiError {
            task_id: Some(id.clone()),
            ..ApiError::not_found(format!("unknown task '{id}'"))
        }),
        (None, Some(env), Some(seed)) => {
            let tier = req.tier.unwrap_or(Difficulty::Easy);
            // Generation certifies the task; it can take a moment for big instances.
            let task =
                sample_adhoc(&state.config.profile, env, tier, seed).map_err(|e| ApiError::internal(e.to_string()))?;
            Ok(Arc::new(task))
        }
        _ => Err(ApiError::bad_request("give either task_id, or env and seed (with an optional tier)")),
    }
}

async fn create_session(
    State(state): State<SharedState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let state2 = Arc::clone(&state);
    let task = tokio::task::spawn_blocking(move || resolve_task(&state2, &req).map(|t| (t, req)))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let (task, req) = task?;
    let episode = create_episode(task, req.rules_revealed)?;
    let session = Session {
        id: Uuid::new_v4(),
        episode,
        actor_tag: req.actor_tag,
        created_at: Utc::now(),
        step_times: Vec::new(),
        last_active: Instant::now(),
    };
    let view = SessionView::of(&session);
    log::info!("session {} opened on {}", view.session_id, view.task_id);
    state.sessions.write().expect("session map lock").insert(session.id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let session = state.session(&id)?;
    let mut s = session.lock().expect("session lock");
    s.last_active = Instant::now();
    Ok(Json(SessionView::of(&s)))
}

async fn step_session(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Result<Json<StepRequest>, JsonRejection>,
) -> ApiResult<StepResponse> {
    let Json(req) = body?;
    let session = state.session(&id)?;
    let mut s = session.lock().expect("session lock");
    s.last_active = Instant::now();
    if s.episode.status().is_terminal() {
        return Err(ApiError::conflict(format!("session {id} has finished with status {:?}", s.episode.status())));
    }
    let action = parse_action(s.episode.task().env_kind, &req.action);
    let outcome = s.episode.step(action)?;
    s.step_times.push(Utc::now());
    if outcome.done {
        if let Some(dir) = &state.config.trace_dir {
            let path = dir.join(format!("{}.json", s.id));
            let text = serde_json::to_string_pretty(&TraceExport::of(&s)).expect("trace values are finite");
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, text)) {
                log::error!("could not write {}: {e}", path.display());
            }
        }
    }
    Ok(Json(StepResponse { session_id: id, outcome }))
}

async fn session_trace(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<TraceExport> {
    let session = state.session(&id)?;
    let mut s = session.lock().expect("session lock");
    s.last_active = Instant::now();
    Ok(Json(TraceExport::of(&s)))
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tasks", get(list_tasks))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/step", post(step_session))
        .route("/sessions/{id}/trace", get(session_trace))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serve until ctrl-c, sweeping idle sessions once a minute.
pub async fn serve(state: SharedState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    let sweeper = Arc::clone(&state);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let dropped = sweeper.sweep_idle(Instant::now());
            if dropped > 0 {
                log::info!("dropped {dropped} idle sessions");
            }
        }
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
