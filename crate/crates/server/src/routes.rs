//! HTTP routes of the session service.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use worldsmith_core::backend::wire::encode_health;
use worldsmith_core::model::{ImageId, SessionConfig, SessionId, TileId, TileRect};
use worldsmith_core::tree::{ManualMode, NodeId};

use crate::error::{ApiError, Body, OptionalBody};
use crate::service::{BlendOptions, GenerateOptions, InputsPatch, Service};

type Svc = State<Arc<Service>>;
type ApiResult = Result<Response, ApiError>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{sid}", get(get_session))
        .route("/sessions/{sid}/grid-gap", put(set_grid_gap))
        .route("/sessions/{sid}/blend-prompt", put(set_blend_prompt))
        .route("/sessions/{sid}/blend", post(blend))
        .route("/sessions/{sid}/blends", get(blends))
        .route("/sessions/{sid}/events", get(events))
        .route("/sessions/{sid}/tiles/{tid}/rect", patch(move_tile))
        .route("/sessions/{sid}/tiles/{tid}/inputs", patch(update_inputs))
        .route("/sessions/{sid}/tiles/{tid}/current-image", put(set_current_image))
        .route("/sessions/{sid}/tiles/{tid}/generate", post(generate))
        .route("/sessions/{sid}/tiles/{tid}/tree", get(tree))
        .route("/sessions/{sid}/tiles/{tid}/tree/select", post(select_node))
        .route("/sessions/{sid}/tiles/{tid}/tree/nodes", post(add_node))
        .route("/jobs/{job_id}", get(job))
        .route("/images/{image_id}", get(image))
        .route("/images/{image_id}/thumbnail", get(image_thumbnail))
        .with_state(service)
}

/// Runs a service call off the async executor; the service does file I/O
/// and takes blocking locks.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

fn ok(value: impl serde::Serialize) -> ApiResult {
    Ok(Json(value).into_response())
}

fn version(v: u64) -> ApiResult {
    ok(json!({ "version": v }))
}

async fn health(State(svc): Svc) -> Json<Value> {
    Json(json!({ "status": "ok", "backend": encode_health(&svc.backend_descriptor()) }))
}

async fn create_session(State(svc): Svc, OptionalBody(config): OptionalBody<SessionConfig>) -> ApiResult {
    let state = blocking(move || svc.create_session(&config)).await?;
    Ok((StatusCode::CREATED, Json(state)).into_response())
}

async fn get_session(State(svc): Svc, Path(sid): Path<String>) -> ApiResult {
    ok(blocking(move || svc.session_state(&SessionId(sid))).await?)
}

#[derive(Deserialize)]
struct RectBody {
    #[serde(flatten)]
    rect: TileRect,
    #[serde(default)]
    expected_version: Option<u64>,
}

async fn move_tile(State(svc): Svc, Path((sid, tid)): Path<(String, String)>, Body(b): Body<RectBody>) -> ApiResult {
    version(blocking(move || svc.move_tile(&SessionId(sid), &TileId(tid), b.rect, b.expected_version)).await?)
}

#[derive(Deserialize)]
struct GapBody {
    grid_gap: u32,
    #[serde(default)]
    expected_version: Option<u64>,
}

async fn set_grid_gap(State(svc): Svc, Path(sid): Path<String>, Body(b): Body<GapBody>) -> ApiResult {
    version(blocking(move || svc.set_grid_gap(&SessionId(sid), b.grid_gap, b.expected_version)).await?)
}

#[derive(Deserialize)]
struct PromptBody {
    prompt: String,
    #[serde(default)]
    expected_version: Option<u64>,
}

async fn set_blend_prompt(State(svc): Svc, Path(sid): Path<String>, Body(b): Body<PromptBody>) -> ApiResult {
    version(blocking(move || svc.set_blend_prompt(&SessionId(sid), &b.prompt, b.expected_version)).await?)
}

#[derive(Deserialize)]
struct CurrentImageBody {
    image_id: Option<ImageId>,
    #[serde(default)]
    expected_version: Option<u64>,
}

async fn set_current_image(
    State(svc): Svc,
    Path((sid, tid)): Path<(String, String)>,
    Body(b): Body<CurrentImageBody>,
) -> ApiResult {
    version(blocking(move || svc.set_current_image(&SessionId(sid), &TileId(tid), b.image_id, b.expected_version)).await?)
}

async fn update_inputs(State(svc): Svc, Path((sid, tid)): Path<(String, String)>, Body(b): Body<InputsPatch>) -> ApiResult {
    let (v, events) = blocking(move || svc.update_inputs(&SessionId(sid), &TileId(tid), b)).await?;
    ok(json!({ "version": v, "events": events }))
}

async fn generate(
    State(svc): Svc,
    Path((sid, tid)): Path<(String, String)>,
    OptionalBody(opts): OptionalBody<GenerateOptions>,
) -> ApiResult {
    let view = blocking(move || svc.generate(&SessionId(sid), &TileId(tid), opts)).await?;
    Ok((StatusCode::ACCEPTED, Json(view)).into_response())
}

async fn job(State(svc): Svc, Path(job_id): Path<String>) -> ApiResult {
    ok(svc.job(&job_id)?)
}

async fn blend(State(svc): Svc, Path(sid): Path<String>, OptionalBody(opts): OptionalBody<BlendOptions>) -> ApiResult {
    let view = blocking(move || svc.blend(&SessionId(sid), opts)).await?;
    Ok((StatusCode::ACCEPTED, Json(view)).into_response())
}

async fn blends(State(svc): Svc, Path(sid): Path<String>) -> ApiResult {
    ok(blocking(move || svc.blends(&SessionId(sid))).await?)
}

async fn events(State(svc): Svc, Path(sid): Path<String>) -> ApiResult {
    let body = blocking(move || svc.events_ndjson(&SessionId(sid))).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn tree(State(svc): Svc, Path((sid, tid)): Path<(String, String)>) -> ApiResult {
    ok(blocking(move || svc.tree(&SessionId(sid), &TileId(tid))).await?)
}

#[derive(Deserialize)]
struct SelectBody {
    node_id: NodeId,
    #[serde(default)]
    expected_version: Option<u64>,
}

async fn select_node(State(svc): Svc, Path((sid, tid)): Path<(String, String)>, Body(b): Body<SelectBody>) -> ApiResult {
    let (inputs, v) = blocking(move || svc.select_node(&SessionId(sid), &TileId(tid), b.node_id, b.expected_version)).await?;
    ok(json!({ "version": v, "inputs": inputs }))
}

#[derive(Deserialize)]
struct AddNodeBody {
    at: NodeId,
    mode: ManualMode,
    #[serde(default)]
    expected_version: Option<u64>,
}

async fn add_node(State(svc): Svc, Path((sid, tid)): Path<(String, String)>, Body(b): Body<AddNodeBody>) -> ApiResult {
    let ((node, inputs), v) =
        blocking(move || svc.add_node(&SessionId(sid), &TileId(tid), b.at, b.mode, b.expected_version)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "version": v, "node_id": node, "inputs": inputs }))).into_response())
}

/// Image ids are content hashes, so responses never change.
fn png_response(etag_id: &str, headers: &HeaderMap, body: Vec<u8>) -> Response {
    let etag = format!("\"{etag_id}\"");
    let cache = [
        (header::CACHE_CONTROL, HeaderValue::from_static("public, max-age=31536000, immutable")),
        (header::ETAG, HeaderValue::from_str(&etag).expect("hex etag")),
    ];
    if headers.get(header::IF_NONE_MATCH).and_then(|v| v.to_str().ok()) == Some(etag.as_str()) {
        return (StatusCode::NOT_MODIFIED, cache).into_response();
    }
    (cache, [(header::CONTENT_TYPE, HeaderValue::from_static("image/png"))], body).into_response()
}

fn image_id(raw: String) -> Result<ImageId, ApiError> {
    if raw.len() == 64 && raw.bytes().all(|b| b.is_ascii_hexdigit()) {
        Ok(ImageId(raw))
    } else {
        Err(ApiError::NotFound(format!("unknown image `{raw}`")))
    }
}

async fn image(State(svc): Svc, Path(raw): Path<String>, headers: HeaderMap) -> ApiResult {
    let id = image_id(raw)?;
    let key = id.0.clone();
    let png = blocking(move || svc.image_png(&id)).await?;
    Ok(png_response(&key, &headers, png))
}

async fn image_thumbnail(State(svc): Svc, Path(raw): Path<String>, headers: HeaderMap) -> ApiResult {
    let id = image_id(raw)?;
    let key = format!("{}-thumb", id.0);
    let png = blocking(move || svc.thumbnail_png(&id)).await?;
    Ok(png_response(&key, &headers, png))
}
