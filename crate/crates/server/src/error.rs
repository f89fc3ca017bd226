use axum::extract::rejection::JsonRejection;
use axum::body::Bytes;
use axum::extract::{FromRequest, Request};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde_json::json;
use thiserror::Error;
use worldsmith_core::backend::BuildError;
use worldsmith_core::compositor::CompositeError;
use worldsmith_core::model::ModelError;
use worldsmith_core::persist::PersistError;
use worldsmith_core::store::StoreError;
use worldsmith_core::tree::TreeError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Invalid { field: field.into(), message: message.to_string() }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match &self {
            ApiError::Invalid { field, message } => json!({ "error": message, "field": field }),
            other => json!({ "error": other.to_string() }),
        };
        if let ApiError::Internal(msg) = &self {
            tracing::error!("internal error: {msg}");
        }
        (self.status(), Json(body)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let field = match &e {
            ModelError::UnknownTile(_) => return ApiError::NotFound(e.to_string()),
            ModelError::InvalidDimension { field, .. } => *field,
            ModelError::GapTooLarge { .. } => "grid_gap",
            ModelError::OutOfBounds { .. } => "rect",
            ModelError::DuplicateColor(_)
            | ModelError::ReservedColor
            | ModelError::DuplicateRegionId(_)
            | ModelError::PaletteExhausted
            | ModelError::InvalidBrush(_) => "regions",
            ModelError::SketchSize { .. } => "sketch",
            ModelError::Strength(_) => "img2img_strength",
        };
        ApiError::invalid(field, e)
    }
}

impl From<TreeError> for ApiError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::UnknownNode(_) => ApiError::NotFound(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<BuildError> for ApiError {
    fn from(e: BuildError) -> Self {
        let field = match &e {
            BuildError::Mask(_) => "regions",
            BuildError::MissingBaseImage(_) => "base_image",
            BuildError::SketchSize { .. } => "sketch",
            BuildError::EmptyInputs(_) => "inputs",
        };
        ApiError::invalid(field, e)
    }
}

impl From<CompositeError> for ApiError {
    fn from(e: CompositeError) -> Self {
        match e {
            CompositeError::NegativeSigma(_) => ApiError::invalid("blur_sigma", e),
            other => ApiError::Conflict(other.to_string()),
        }
    }
}

impl From<PersistError> for ApiError {
    fn from(e: PersistError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

/// JSON body extractor whose rejections use the API error format.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(rejection(e)),
        }
    }
}

fn rejection(e: JsonRejection) -> ApiError {
    ApiError::invalid("body", e.body_text())
}

/// Like [`Body`] but an empty request body yields `T::default()`.
pub struct OptionalBody<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Default> FromRequest<S> for OptionalBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| ApiError::invalid("body", e.body_text()))?;
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Ok(OptionalBody(T::default()));
        }
        serde_json::from_slice(&bytes).map(OptionalBody).map_err(|e| ApiError::invalid("body", e))
    }
}
