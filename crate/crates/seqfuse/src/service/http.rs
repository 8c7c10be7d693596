use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use seqfuse_core::data::CameraId;

use super::engine::{CameraList, ConfirmRequest, CreateRequest, EngineError, DEFAULT_TOP};
use super::identicon::identicon_svg;
use super::Service;

pub type SharedService = Arc<Mutex<Service>>;

struct ApiError(StatusCode, String);

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError(
            StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            e.to_string(),
        )
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body {
            status: u16,
            error: String,
        }
        (
            self.0,
            Json(Body {
                status: self.0.as_u16(),
                error: self.1,
            }),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn lock(state: &SharedService) -> MutexGuard<'_, Service> {
    state
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn session_id(raw: &str) -> ApiResult<u64> {
    raw.parse()
        .map_err(|_| ApiError(StatusCode::NOT_FOUND, format!("unknown session {raw:?}")))
}

#[derive(Debug, Deserialize)]
struct TopQuery {
    top: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    session: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    camera: Option<CameraId>,
    top: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ListsResponse {
    session: u64,
    k: usize,
    lists: Vec<CameraList>,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    model: bool,
    study: bool,
    records: usize,
    sessions: usize,
}

/// The `/v1` API over a shared service.
pub fn router(state: SharedService) -> Router {
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}", get(show))
        .route("/v1/sessions/{id}/confirm", post(confirm))
        .route("/v1/sessions/{id}/restart", post(restart))
        .route("/v1/sessions/{id}/lists", get(lists))
        .route("/v1/logs/export", get(export))
        .route("/v1/records/{id}/thumbnail", get(thumbnail))
        .with_state(state)
}

async fn healthz(State(state): State<SharedService>) -> Json<Health> {
    let s = lock(&state);
    let e = s.engine();
    Json(Health {
        status: "ok",
        model: e.has_model(),
        study: e.study(),
        records: e.dataset().len(),
        sessions: e.session_count(),
    })
}

async fn create(
    State(state): State<SharedService>,
    Query(q): Query<TopQuery>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let mut s = lock(&state);
    let id = s.create(req)?;
    let view = s.engine().view(id, q.top.unwrap_or(DEFAULT_TOP))?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn show(
    State(state): State<SharedService>,
    Path(id): Path<String>,
    Query(q): Query<TopQuery>,
) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let view = lock(&state)
        .engine()
        .view(id, q.top.unwrap_or(DEFAULT_TOP))?;
    Ok(Json(view).into_response())
}

async fn confirm(
    State(state): State<SharedService>,
    Path(id): Path<String>,
    Query(q): Query<TopQuery>,
    body: Result<Json<ConfirmRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let Json(req) = body?;
    let mut s = lock(&state);
    s.confirm(id, req)?;
    Ok(Json(s.engine().view(id, q.top.unwrap_or(DEFAULT_TOP))?).into_response())
}

async fn restart(
    State(state): State<SharedService>,
    Path(id): Path<String>,
    Query(q): Query<TopQuery>,
) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let mut s = lock(&state);
    s.restart(id)?;
    Ok(Json(s.engine().view(id, q.top.unwrap_or(DEFAULT_TOP))?).into_response())
}

async fn lists(
    State(state): State<SharedService>,
    Path(id): Path<String>,
    Query(q): Query<ListQuery>,
) -> ApiResult<Response> {
    let id = session_id(&id)?;
    let s = lock(&state);
    let lists = s
        .engine()
        .lists(id, q.camera, q.top.unwrap_or(DEFAULT_TOP))?;
    let k = s.engine().view(id, 0)?.k;
    Ok(Json(ListsResponse {
        session: id,
        k,
        lists,
    })
    .into_response())
}

async fn export(
    State(state): State<SharedService>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let s = lock(&state);
    let doc = match q.session {
        Some(id) => s.engine().export_session_log(id)?,
        None => s.engine().export_logs(),
    };
    Ok(Json(doc).into_response())
}

async fn thumbnail(
    State(state): State<SharedService>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let s = lock(&state);
    let ds = s.engine().dataset();
    let idx = ds
        .find(&id)
        .ok_or_else(|| ApiError::from(EngineError::UnknownRecord(id.clone())))?;
    let r = ds.record(idx);
    Ok(match &r.image {
        Some(uri) => (StatusCode::FOUND, [(header::LOCATION, uri.clone())]).into_response(),
        None => (
            [(header::CONTENT_TYPE, "image/svg+xml")],
            identicon_svg(r.pid, r.camera),
        )
            .into_response(),
    })
}
