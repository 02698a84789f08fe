//! JSON-over-HTTP front end: sessions, batch conversion, knowledge-base
//! administration and static hosting for the web client.
//!
//! | Method | Path | Notes |
//! |---|---|---|
//! | POST | `/api/sessions` | 201 `{session_id}`; user from `x-user-id` |
//! | POST | `/api/sessions/{id}/messages` | `{text}` → reply; 404, 409, 422 |
//! | POST | `/api/sessions/{id}/new` | start a new requirement in the session |
//! | GET | `/api/sessions/{id}/transcript` | JSONL transcript |
//! | DELETE | `/api/sessions/{id}` | 204; queues learned samples, flushes if configured |
//! | POST | `/api/batch` | `text/*` body, one requirement per line; 413, 415 |
//! | POST | `/api/admin/flush` | `x-admin-token`; 401 without it |
//! | GET | `/api/admin/kb` | `x-admin-token`; snapshot summary |
//! | GET | `/health` | |
//!
//! Errors are `{error, detail}`.

mod config;
mod state;

use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use specassist_core::kb::VocabProvenance;
use specassist_core::{convert_batch, DialogueError, KeywordFrame, Reply, SlotKind};
use tower_http::services::ServeDir;

pub use config::ServiceConfig;
pub use state::AppState;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        Self { status, error, detail: detail.into() }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error, "detail": self.detail }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageResponse {
    pub reply_text: String,
    pub state: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<SlotKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<KeywordFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub friendly: Option<String>,
}

impl From<Reply> for MessageResponse {
    fn from(r: Reply) -> Self {
        let (formal, friendly) = r.spec_view.map(|s| (s.formal, s.friendly)).unzip();
        Self {
            reply_text: r.text,
            state: r.state_after.name().to_string(),
            slot: r.state_after.slot(),
            frame: r.frame_view,
            formal,
            friendly,
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", delete(close_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/new", post(new_requirement))
        .route("/api/sessions/{id}/transcript", get(transcript))
        .route("/api/batch", post(batch))
        .route("/api/admin/flush", post(flush))
        .route("/api/admin/kb", get(kb_stats))
        .layer(DefaultBodyLimit::max(32 * 1024 * 1024));
    let api = match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") }),
    };
    api.with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "kb_version": state.kb().version() }))
}

async fn create_session(State(state): State<Arc<AppState>>, headers: HeaderMap) -> impl IntoResponse {
    let user = headers.get("x-user-id").and_then(|v| v.to_str().ok()).filter(|s| !s.is_empty()).unwrap_or("anonymous");
    let id = state.open_session(user);
    (StatusCode::CREATED, Json(json!({ "session_id": id })))
}

#[derive(Deserialize)]
struct MessageRequest {
    text: String,
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<MessageResponse>> {
    let slot = state.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let req: MessageRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("expected {{\"text\": ...}}: {e}")))?;
    let mut slot = slot.lock().await;
    slot.last_seen = Instant::now();
    let session = slot.session.as_mut().ok_or_else(|| ApiError::unknown_session(&id))?;
    let kb = state.kb();
    match session.handle_message(&req.text, &kb) {
        Ok(reply) => Ok(Json(reply.into())),
        Err(DialogueError::EmptyMessage) => {
            Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_message", "message text is empty"))
        }
        Err(DialogueError::Finalized) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_finalized",
            "the requirement is finalized; start a new requirement or open a new session",
        )),
    }
}

async fn new_requirement(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let slot = state.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let mut slot = slot.lock().await;
    slot.last_seen = Instant::now();
    let session = slot.session.as_mut().ok_or_else(|| ApiError::unknown_session(&id))?;
    session.start_new_requirement();
    Ok(Json(json!({ "state": session.state().name() })))
}

async fn transcript(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let slot = state.session(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let slot = slot.lock().await;
    let session = slot.session.as_ref().ok_or_else(|| ApiError::unknown_session(&id))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], session.transcript_jsonl()).into_response())
}

async fn close_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if state.close_session(&id).await {
        if state.config.flush_on_sign_out {
            flush_quietly(&state).await;
        }
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::unknown_session(&id))
    }
}

async fn batch(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let content_type = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("");
    if !content_type.trim_start().to_ascii_lowercase().starts_with("text/") {
        return Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media_type",
            format!("expected a text/* upload, got `{content_type}`"),
        ));
    }
    let text = std::str::from_utf8(&body).map_err(|e| {
        ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", format!("upload is not UTF-8: {e}"))
    })?;
    let lines = text.lines().filter(|l| !l.trim().is_empty()).count();
    let limit = state.config.batch_line_limit;
    if lines > limit {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too_many_lines",
            format!("{lines} requirements exceed the limit of {limit}"),
        ));
    }
    let kb = state.kb();
    Ok(Json(convert_batch(text, &kb)).into_response())
}

fn check_admin(state: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    let given = headers.get("x-admin-token").and_then(|v| v.to_str().ok());
    match (&state.config.admin_token, given) {
        (Some(expected), Some(given)) if expected == given => Ok(()),
        (None, _) => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "no admin token is configured")),
        _ => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong x-admin-token")),
    }
}

async fn flush(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Json<serde_json::Value>> {
    check_admin(&state, &headers)?;
    let report = state.flush().await.map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_write_failed", format!("could not write the store: {e}"))
    })?;
    Ok(Json(json!({ "new_version": report.new_version, "accepted": report.accepted, "rejected": report.rejected })))
}

async fn kb_stats(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Json<serde_json::Value>> {
    check_admin(&state, &headers)?;
    let kb = state.kb();
    let learned = kb.vocabulary().iter().filter(|e| e.provenance == VocabProvenance::Learned).count();
    Ok(Json(json!({
        "version": kb.version(),
        "vocabulary": kb.vocabulary().len(),
        "learned_vocabulary": learned,
        "patterns": kb.patterns().len(),
        "ordinal_scales": kb.ordinal_scales().keys().collect::<Vec<_>>(),
        "rejection_log": kb.rejection_log().len(),
        "queued_samples": state.queue_len(),
        "open_sessions": state.session_count(),
    })))
}

async fn flush_quietly(state: &AppState) {
    if let Err(e) = state.flush().await {
        eprintln!("flush failed, samples stay queued: {e}");
    }
}

/// Runs the periodic flush and the idle-session reaper until the process
/// exits.
pub fn spawn_background_tasks(state: Arc<AppState>) {
    let flusher = state.clone();
    tokio::spawn(async move {
        let period = flusher.config.flush_period().max(std::time::Duration::from_secs(1));
        let mut tick = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
        loop {
            tick.tick().await;
            flush_quietly(&flusher).await;
        }
    });
    tokio::spawn(async move {
        let every = (state.config.session_ttl() / 2).clamp(std::time::Duration::from_secs(1), std::time::Duration::from_secs(60));
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            if state.expire_sessions().await > 0 && state.config.flush_on_sign_out {
                flush_quietly(&state).await;
            }
        }
    });
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    spawn_background_tasks(state.clone());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
