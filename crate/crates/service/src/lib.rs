//! HTTP service over the audit store.
//!
//! Endpoints (all JSON):
//! - `POST /v1/audit` with `{user_id, timestamp, preferences: [...]}`
//!   ingests a snapshot and returns the `{added, deleted}` diff.
//! - `GET /v1/users/{id}/report` returns the user's audit record.
//! - `GET /v1/blacklist` returns the blacklist entries with scores.
//!
//! Errors are `{code, message}` objects. Writes take the store's write
//! lock, so ingests for the same user are serialized; reads run
//! concurrently and observe a consistent prior state.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::Serialize;

use adaudit_core::audit::{AuditDiff, AuditRequest, AuditStore, BlacklistView};
use adaudit_core::corpus::KeywordDictionary;
use adaudit_core::embeddings::WordVectorStore;
use adaudit_core::scoring::Scorer;
use adaudit_core::Error as CoreError;

/// Embeddings and dictionary used to score preferences the blacklist has
/// never seen.
pub struct ScoringContext {
    pub store: WordVectorStore,
    pub dictionary: KeywordDictionary,
}

impl ScoringContext {
    fn scorer(&self) -> Result<Scorer<'_>, CoreError> {
        Scorer::new(&self.store, &self.dictionary)
    }
}

/// Shared service state.
pub struct AppState {
    pub store: RwLock<AuditStore>,
    pub scoring: Option<ScoringContext>,
}

impl AppState {
    pub fn new(store: AuditStore, scoring: Option<ScoringContext>) -> Arc<Self> {
        Arc::new(AppState {
            store: RwLock::new(store),
            scoring,
        })
    }
}

#[derive(Debug, Serialize)]
struct ApiError {
    code: &'static str,
    message: String,
}

struct ServiceError(StatusCode, ApiError);

impl ServiceError {
    fn from_core(err: CoreError) -> Self {
        let (status, code) = match &err {
            CoreError::NonMonotonicTimestamp { .. } => (StatusCode::CONFLICT, "stale_timestamp"),
            e if e.is_validation() => (StatusCode::BAD_REQUEST, "invalid_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal_error"),
        };
        ServiceError(
            status,
            ApiError {
                code,
                message: err.to_string(),
            },
        )
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

async fn post_audit(
    State(state): State<Arc<AppState>>,
    Json(request): Json<AuditRequest>,
) -> Result<Json<AuditDiff>, ServiceError> {
    let scorer = match &state.scoring {
        Some(ctx) => Some(ctx.scorer().map_err(ServiceError::from_core)?),
        None => None,
    };
    let diff = state
        .store
        .write()
        .ingest_snapshot(
            &request.user_id,
            &request.preferences,
            request.timestamp,
            scorer.as_ref(),
        )
        .map_err(ServiceError::from_core)?;
    Ok(Json(diff))
}

async fn get_user_report(
    State(state): State<Arc<AppState>>,
    Path(user_id): Path<String>,
) -> Response {
    Json(state.store.read().user_report(&user_id)).into_response()
}

async fn get_blacklist(State(state): State<Arc<AppState>>) -> Response {
    Json(BlacklistView::of(state.store.read().blacklist())).into_response()
}

/// Builds the router over shared state.
pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/audit", post(post_audit))
        .route("/v1/users/{id}/report", get(get_user_report))
        .route("/v1/blacklist", get(get_blacklist))
        .with_state(state)
}

/// Serves until the listener errors or the task is dropped.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
