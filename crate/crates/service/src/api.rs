//! HTTP surface for live and simulated sessions.
//!
//! Every mutation is applied to a copy of the session, written to disk, and
//! only then made visible, so the stored document never lags behind a
//! response that has already been sent.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use optotune::evaluation::EvaluationError;
use optotune::session::LoggedInput;
use optotune::sim::{
    execute_handover, sample_trajectory, ActivityInterval, FailureConfig, FailureMode, TrajectoryPoint,
};
use optotune::{
    Action, EngineError, FailureReport, HandoverParams, ParameterValue, PracticeOutcome, Session, SessionConfig,
    SessionError, SessionPhase, SessionReport, SessionStore, Side, StoreError,
};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex as SessionLock;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl ApiError {
    fn status_and_kind(&self) -> (StatusCode, &'static str) {
        match self {
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::Store(StoreError::UnknownSession(_)) | ApiError::Session(SessionError::UnknownSession(_)) => {
                (StatusCode::NOT_FOUND, "unknown_session")
            }
            ApiError::Store(StoreError::InvalidId(_)) => (StatusCode::BAD_REQUEST, "invalid_id"),
            ApiError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
            ApiError::Session(e) => match e {
                SessionError::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
                SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
                SessionError::WrongPhase { .. } => (StatusCode::CONFLICT, "wrong_phase"),
                SessionError::StalePair(_) => (StatusCode::CONFLICT, "stale_pair"),
                SessionError::StaleTrial(_) => (StatusCode::CONFLICT, "stale_trial"),
                SessionError::Engine(EngineError::InvalidChoice { .. }) => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "invalid_choice")
                }
                SessionError::Engine(_) | SessionError::Plan(_) => (StatusCode::CONFLICT, "protocol"),
                SessionError::Evaluation(EvaluationError::AlreadyGuessed(_)) => {
                    (StatusCode::CONFLICT, "already_guessed")
                }
                SessionError::Evaluation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "evaluation"),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = self.status_and_kind();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (
            status,
            Json(serde_json::json!({ "error": kind, "message": self.to_string() })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Inner {
    store: SessionStore,
    defaults: SessionConfig,
    sessions: Mutex<HashMap<String, Arc<SessionLock<Session>>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(store: SessionStore, defaults: SessionConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                store,
                defaults,
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn store(&self) -> &SessionStore {
        &self.inner.store
    }

    /// Cached handle, loading the document from disk on first use.
    fn handle(&self, id: &str) -> Result<Arc<SessionLock<Session>>, ApiError> {
        let mut sessions = self.inner.sessions.lock().expect("session map poisoned");
        if let Some(h) = sessions.get(id) {
            return Ok(h.clone());
        }
        let session = self.inner.store.load(id)?;
        let h = Arc::new(SessionLock::new(session));
        sessions.insert(id.to_string(), h.clone());
        Ok(h)
    }

    async fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, ApiError> {
        let h = self.handle(id)?;
        let session = h.lock().await;
        Ok(f(&session))
    }

    async fn mutate(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<Action, SessionError>,
    ) -> Result<MutationResponse, ApiError> {
        let h = self.handle(id)?;
        let mut session = h.lock().await;
        let mut next = session.clone();
        let action = f(&mut next)?;
        self.inner.store.save(&next)?;
        *session = next;
        Ok(MutationResponse {
            phase: session.phase(),
            clock_ms: session.clock_ms(),
            action,
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub seed: Option<u64>,
    pub config: Option<SessionConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub action: Action,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MutationResponse {
    pub phase: SessionPhase,
    pub clock_ms: u64,
    pub action: Action,
}

#[derive(Debug, Deserialize)]
pub struct ChoiceRequest {
    pub pair_id: String,
    pub side: Side,
}

#[derive(Debug, Deserialize)]
pub struct FailureRequest {
    pub pair_id: String,
    #[serde(default)]
    pub side: Option<Side>,
    #[serde(default)]
    pub mode: Option<FailureMode>,
}

#[derive(Debug, Deserialize)]
pub struct GuessRequest {
    pub trial_id: String,
    pub side: Side,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TunedValue {
    pub parameter: String,
    pub value: ParameterValue,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrialStatus {
    pub trial_id: String,
    pub guessed: bool,
}

/// Session state as shown to clients. Which side of an evaluation trial holds
/// the tuned handover is never included.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub phase: SessionPhase,
    pub clock_ms: u64,
    pub action: Action,
    pub current_parameter: Option<String>,
    pub tuned: Vec<TunedValue>,
    pub total_comparisons: u32,
    pub repeated_pairs: u32,
    pub handovers: usize,
    pub failed_handovers: usize,
    pub trials: Vec<TrialStatus>,
    pub inputs: Vec<LoggedInput>,
}

fn view(session: &Session) -> SessionView {
    SessionView {
        session_id: session.id().to_string(),
        phase: session.phase(),
        clock_ms: session.clock_ms(),
        action: session.next_action(),
        current_parameter: session.plan().tuner().map(|t| t.spec().name().to_string()),
        tuned: session
            .plan()
            .tuned()
            .iter()
            .map(|(p, v)| TunedValue {
                parameter: p.clone(),
                value: *v,
            })
            .collect(),
        total_comparisons: session.total_comparisons(),
        repeated_pairs: session.repeated_pairs(),
        handovers: session.handovers().len(),
        failed_handovers: session.handovers().iter().filter(|h| !h.record.success).count(),
        trials: session
            .trials()
            .iter()
            .map(|t| TrialStatus {
                trial_id: t.trial_id.clone(),
                guessed: t.guess.is_some(),
            })
            .collect(),
        inputs: session.inputs().to_vec(),
    }
}

fn parse_optional<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<Option<T>, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(None);
    }
    serde_json::from_slice(body)
        .map(Some)
        .map_err(|e| ApiError::BadRequest(e.to_string()))
}

fn parse_required<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    parse_optional(body)?.ok_or_else(|| ApiError::BadRequest("missing request body".into()))
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let request: CreateSessionRequest = parse_optional(&body)?.unwrap_or_default();
    let id = uuid::Uuid::new_v4();
    let mut config = request.config.unwrap_or_else(|| state.inner.defaults.clone());
    // Without an explicit seed every session gets its own.
    config.seed = request.seed.unwrap_or_else(|| id.as_u64_pair().0);
    let session_id = id.simple().to_string();
    let session = Session::new(session_id.clone(), config)?;
    state.store().save(&session)?;
    let action = session.next_action();
    state
        .inner
        .sessions
        .lock()
        .expect("session map poisoned")
        .insert(session_id.clone(), Arc::new(SessionLock::new(session)));
    tracing::info!(%session_id, "session created");
    Ok((StatusCode::CREATED, Json(CreateSessionResponse { session_id, action })))
}

async fn list_sessions(State(state): State<AppState>) -> ApiResult<Vec<String>> {
    Ok(Json(state.store().list()?))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    Ok(Json(state.read(&id, view).await?))
}

async fn get_action(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Action> {
    Ok(Json(state.read(&id, Session::next_action).await?))
}

async fn post_choice(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<MutationResponse> {
    let req: ChoiceRequest = parse_required(&body)?;
    Ok(Json(
        state.mutate(&id, |s| s.post_choice(&req.pair_id, req.side)).await?,
    ))
}

async fn post_failure(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<MutationResponse> {
    let req: FailureRequest = parse_required(&body)?;
    // A reported failure is always recorded, even if the simulator drew none.
    let report = Some(FailureReport {
        side: req.side,
        mode: req.mode,
    });
    Ok(Json(state.mutate(&id, |s| s.post_failure(&req.pair_id, report)).await?))
}

async fn practice_done(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<MutationResponse> {
    let outcome: Option<PracticeOutcome> = parse_optional(&body)?;
    Ok(Json(state.mutate(&id, |s| s.practice_done(outcome)).await?))
}

async fn eval_guess(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<MutationResponse> {
    let req: GuessRequest = parse_required(&body)?;
    Ok(Json(
        state.mutate(&id, |s| s.eval_guess(&req.trial_id, req.side)).await?,
    ))
}

async fn get_report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionReport> {
    Ok(Json(state.read(&id, Session::report).await?))
}

#[derive(Debug, Deserialize)]
pub struct PreviewQuery {
    /// JSON object of decimal strings; defaults to the range midpoints.
    pub params: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub dt_ms: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub params: HandoverParams,
    pub duration_ms: u64,
    pub events: Vec<ActivityInterval>,
    pub trajectory: Vec<TrajectoryPoint>,
}

async fn preview(State(state): State<AppState>, Query(q): Query<PreviewQuery>) -> ApiResult<PreviewResponse> {
    let defaults = &state.inner.defaults;
    let params = match q.params {
        Some(raw) => serde_json::from_str::<HandoverParams>(&raw).map_err(|e| ApiError::BadRequest(e.to_string()))?,
        None => optotune::param::midpoint_params(&defaults.specs).map_err(|e| ApiError::BadRequest(e.to_string()))?,
    };
    params
        .validate(&defaults.specs)
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let sim = &defaults.simulator;
    let record = execute_handover(&params, &sim.human, &FailureConfig::none(), &sim.robot, q.seed);
    let trajectory = sample_trajectory(&record, &sim.robot, q.dt_ms.unwrap_or(50));
    Ok(Json(PreviewResponse {
        params,
        duration_ms: record.end_ms(),
        events: record.events,
        trajectory,
    }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/action", get(get_action))
        .route("/api/sessions/{id}/choice", post(post_choice))
        .route("/api/sessions/{id}/failure", post(post_failure))
        .route("/api/sessions/{id}/practice-done", post(practice_done))
        .route("/api/sessions/{id}/eval-guess", post(eval_guess))
        .route("/api/sessions/{id}/report", get(get_report))
        .route("/api/preview", get(preview))
        .with_state(state)
}
