use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ikiwisi_core::session::EventKind;
use serde_json::json;
use tokio::net::TcpListener;

use crate::catalog::{Catalog, CatalogError, CreateSessionRequest, RecordRequest};

pub type AppState = Arc<Catalog>;

pub struct ApiError(CatalogError);

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            CatalogError::NotFound(_) => StatusCode::NOT_FOUND,
            CatalogError::BadRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            CatalogError::Conflict(_) => StatusCode::CONFLICT,
            CatalogError::Storage(_) | CatalogError::Replay { .. } | CatalogError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a blocking catalog call (it may fsync) off the async workers.
async fn blocking<T, F>(state: AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Catalog) -> Result<T, CatalogError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError(CatalogError::Internal(e.to_string())))?
        .map(Json)
        .map_err(ApiError)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/datasets", get(list_datasets))
        .route("/api/datasets/{dataset}/segments/{segment}", get(get_segment))
        .route("/api/models", get(list_models))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/events", post(post_event).get(get_events))
        .route("/api/sessions/{id}/grid", get(get_grid))
        .route("/api/sessions/{id}/record", post(post_record))
        .route("/api/analysis/ratings", get(get_ratings))
        .with_state(state)
}

async fn list_datasets(State(c): State<AppState>) -> impl IntoResponse {
    Json(c.datasets())
}

async fn get_segment(
    State(c): State<AppState>,
    Path((dataset, segment)): Path<(String, String)>,
) -> ApiResult<ikiwisi_core::Segment> {
    Ok(Json(c.segment(&dataset, &segment)?))
}

async fn list_models(State(c): State<AppState>) -> impl IntoResponse {
    Json(c.models().to_vec())
}

async fn create_session(
    State(c): State<AppState>,
    Json(req): Json<CreateSessionRequest>,
) -> Result<(StatusCode, Json<ikiwisi_core::EvalSession>), ApiError> {
    let Json(s) = blocking(c, move |c| c.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn get_session(State(c): State<AppState>, Path(id): Path<String>) -> ApiResult<crate::catalog::SessionView> {
    Ok(Json(c.session_view(&id)?))
}

async fn get_events(State(c): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<ikiwisi_core::SessionEvent>> {
    Ok(Json(c.session_events(&id)?))
}

async fn post_event(
    State(c): State<AppState>,
    Path(id): Path<String>,
    Json(event): Json<EventKind>,
) -> ApiResult<crate::catalog::EventAck> {
    blocking(c, move |c| c.submit_event(&id, event)).await
}

async fn get_grid(State(c): State<AppState>, Path(id): Path<String>) -> ApiResult<crate::catalog::GridView> {
    Ok(Json(c.grid(&id)?))
}

async fn post_record(
    State(c): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<RecordRequest>,
) -> ApiResult<ikiwisi_core::RatingRecord> {
    blocking(c, move |c| c.record(&id, req)).await
}

async fn get_ratings(State(c): State<AppState>) -> impl IntoResponse {
    Json(c.analysis())
}

/// Binds `addr` and serves until `shutdown` resolves. Returns the bound
/// address through `on_bound` before accepting connections.
pub async fn serve<F>(
    state: AppState,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: F,
) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    let listener = TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
