//! The `/v1` generation protocol served over any [`Backend`].

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use worldsmith_core::backend::wire::{decode_request, encode_health, encode_job, JobCreated, WireHealth, WireJob, WireRequest};
use worldsmith_core::backend::{submit, Backend, BackendError, JobId};

use crate::error::{ApiError, Body};

pub fn router(backend: Arc<dyn Backend>) -> Router {
    Router::new()
        .route("/v1/generate", post(generate))
        .route("/v1/jobs/{job_id}", get(job))
        .route("/v1/health", get(health))
        .with_state(backend)
}

fn backend_error(e: BackendError) -> ApiError {
    match e {
        BackendError::Invalid(e) => ApiError::invalid("request", e),
        BackendError::UnsupportedKind(_) => ApiError::invalid("kind", e),
        BackendError::ResolutionTooLarge { .. } => ApiError::invalid("width", e),
        BackendError::UnknownJob(_) => ApiError::NotFound(e.to_string()),
        other => ApiError::Internal(other.to_string()),
    }
}

async fn generate(
    State(backend): State<Arc<dyn Backend>>,
    Body(wire): Body<WireRequest>,
) -> Result<(StatusCode, Json<JobCreated>), ApiError> {
    let request = decode_request(&wire).map_err(|e| ApiError::invalid("request", e))?;
    let job_id = tokio::task::spawn_blocking(move || submit(backend.as_ref(), request))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(backend_error)?;
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job_id })))
}

async fn job(State(backend): State<Arc<dyn Backend>>, Path(job_id): Path<String>) -> Result<Json<WireJob>, ApiError> {
    let job = tokio::task::spawn_blocking(move || backend.poll(&JobId(job_id)))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(backend_error)?;
    Ok(Json(encode_job(&job)))
}

async fn health(State(backend): State<Arc<dyn Backend>>) -> Json<WireHealth> {
    Json(encode_health(&backend.descriptor()))
}
