//! HTTP service for interactive conditioning of a loaded model.
//!
//! Endpoints (JSON bodies, see `docs/api.md`):
//!
//! - `GET /model/meta`
//! - `POST /condition`
//! - `GET /mode?k=&t=` and `POST /mode` for modes of a conditional model
//! - `POST /sample`
//!
//! Inadmissible values and out-of-range modes give 422, a singular
//! conditioning system 409 and malformed bodies 400.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use jointshape::{Error, JointModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub mod api;

pub use api::{
    condition_response, mode_response, model_meta, sample_response, ConditionRequest, ConditionResponse, Conditioning,
    ModeRequest, ModeResponse, ModelMeta, SampleRequest, SampleResponse,
};

/// The immutable model shared by all requests.
#[derive(Debug, Clone)]
pub struct AppState {
    model: Arc<JointModel>,
    meta: Arc<Vec<u8>>,
}

impl AppState {
    pub fn new(model: JointModel) -> Self {
        let meta = serde_json::to_vec(&model_meta(&model)).expect("metadata serializes");
        Self {
            model: Arc::new(model),
            meta: Arc::new(meta),
        }
    }

    pub fn model(&self) -> &JointModel {
        &self.model
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/model/meta", get(meta))
        .route("/condition", post(condition))
        .route("/mode", get(mode_get).post(mode_post))
        .route("/sample", post(sample))
        .with_state(state)
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    message: String,
}

/// An error response with a JSON body naming the error class.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    class: String,
    message: String,
}

impl ApiError {
    fn malformed(message: String) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            class: "MalformedRequest".into(),
            message,
        }
    }
}

pub fn status_of(err: &Error) -> StatusCode {
    match err {
        Error::SingularConditioning => StatusCode::CONFLICT,
        Error::InvalidLevel { .. }
        | Error::InvalidInput(_)
        | Error::InvalidMode { .. }
        | Error::InvalidRank { .. }
        | Error::InvalidTask(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        Self {
            status: status_of(&err),
            class: err.class().into(),
            message: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_vec(&ErrorBody {
            error: self.class,
            message: self.message,
        })
        .unwrap_or_default();
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError::malformed(e.to_string()))
}

/// Runs `f` on the blocking pool and serializes its result.
async fn compute<T, R>(state: AppState, request: T, f: fn(&JointModel, &T) -> jointshape::Result<R>) -> Result<Response, ApiError>
where
    T: Send + 'static,
    R: Serialize + Send + 'static,
{
    let result = tokio::task::spawn_blocking(move || f(&state.model, &request).map(|r| serde_json::to_vec(&r)))
        .await
        .map_err(|e| ApiError::from(Error::InvalidInput(format!("request failed: {e}"))))??;
    let body = result.map_err(|e| ApiError::from(Error::FormatError(e.to_string())))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn meta(State(state): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], state.meta.as_ref().clone()).into_response()
}

async fn condition(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: ConditionRequest = parse_body(&body)?;
    compute(state, request, condition_response).await
}

#[derive(Debug, Deserialize)]
struct ModeQuery {
    #[serde(default = "one")]
    k: usize,
    #[serde(default)]
    t: f64,
}

fn one() -> usize {
    1
}

async fn mode_get(State(state): State<AppState>, query: Result<Query<ModeQuery>, QueryRejection>) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::malformed(e.body_text()))?;
    let request = ModeRequest {
        conditioning: Conditioning::default(),
        k: q.k,
        t: q.t,
    };
    compute(state, request, mode_response).await
}

async fn mode_post(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: ModeRequest = parse_body(&body)?;
    compute(state, request, mode_response).await
}

async fn sample(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: SampleRequest = parse_body(&body)?;
    compute(state, request, sample_response).await
}
