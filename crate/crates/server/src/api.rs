use std::io;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nextword_core::predictor::DEFAULT_MAX_LEN;
use nextword_core::{Engine, Error as CoreError, ModelBundle64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use crate::state::{AppState, Metrics};
use crate::ServerConfig;

pub const MAX_K: usize = 20;
/// Upper bound on generated tokens per completion request.
pub const MAX_COMPLETE_LEN: usize = 200;

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct SuggestRequest {
    pub context: String,
    #[serde(default)]
    pub k: Option<i64>,
    #[serde(default)]
    pub engine: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct CandidateBody {
    pub token: String,
    pub probability: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct SuggestResponse {
    pub candidates: Vec<CandidateBody>,
    pub order_used: usize,
    pub latency_ms: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CompleteRequest {
    pub prefix: String,
    #[serde(default)]
    pub engine: Option<String>,
    #[serde(default)]
    pub max_len: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct CompleteResponse {
    pub tokens: Vec<String>,
    pub terminated_by: String,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct HealthResponse {
    pub status: String,
    pub bundle_orders: Vec<usize>,
    pub vocab_size: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug)]
enum ApiError {
    BadRequest(String),
    Unprocessable(String),
    NotReady,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::NotReady => (StatusCode::SERVICE_UNAVAILABLE, "model bundle is still loading".to_owned()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::EmptyContext => ApiError::BadRequest(e.to_string()),
            CoreError::MissingModel(_) => ApiError::Unprocessable(e.to_string()),
            other => {
                log::error!("prediction failed: {other}");
                ApiError::Internal(other.to_string())
            }
        }
    }
}

/// Routes under `/api/`, with CORS for `config.cors_origin` (any origin when unset).
pub fn app(state: AppState, config: &ServerConfig) -> io::Result<Router> {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = match &config.cors_origin {
        Some(origin) => cors.allow_origin(
            HeaderValue::from_str(origin)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, format!("cors origin {origin:?}: {e}")))?,
        ),
        None => cors.allow_origin(Any),
    };
    Ok(Router::new()
        .route("/api/health", get(health))
        .route("/api/suggest", post(suggest))
        .route("/api/complete", post(complete))
        .layer(cors)
        .with_state(state))
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed request body: {e}")))
}

fn parse_engine(name: Option<&str>) -> Result<Engine, ApiError> {
    match name {
        None => Ok(Engine::Neural),
        Some(n) => Engine::parse(n).ok_or_else(|| ApiError::Unprocessable(format!("unknown engine {n:?}"))),
    }
}

fn loaded(state: &AppState) -> Result<&ModelBundle64, ApiError> {
    state.bundle().ok_or(ApiError::NotReady)
}

fn tokens_of(bundle: &ModelBundle64, text: &str, field: &str) -> Result<Vec<String>, ApiError> {
    let tokens = bundle.tokenize_input(text);
    if tokens.is_empty() {
        return Err(ApiError::BadRequest(format!("{field} has no usable tokens")));
    }
    Ok(tokens)
}

fn counted<T>(metrics: &Metrics, r: Result<T, ApiError>) -> Result<T, ApiError> {
    if r.is_err() {
        Metrics::bump(&metrics.errors);
    }
    r
}

async fn health(State(state): State<AppState>) -> Result<Json<HealthResponse>, ApiError> {
    Metrics::bump(&state.metrics().health);
    let bundle = loaded(&state)?;
    Ok(Json(HealthResponse {
        status: "ok".into(),
        bundle_orders: bundle.neural_orders(),
        vocab_size: bundle.vocabulary().size(),
    }))
}

async fn suggest(State(state): State<AppState>, body: Bytes) -> Result<Json<SuggestResponse>, ApiError> {
    let start = Instant::now();
    Metrics::bump(&state.metrics().suggest);
    let result = (|| {
        let bundle = loaded(&state)?;
        let req: SuggestRequest = parse_body(&body)?;
        let engine = parse_engine(req.engine.as_deref())?;
        let k = req.k.unwrap_or(5).clamp(1, MAX_K as i64) as usize;
        let context = tokens_of(bundle, &req.context, "context")?;
        let s = bundle.suggest(&context, k, engine)?;
        Ok(SuggestResponse {
            candidates: s
                .candidates
                .into_iter()
                .map(|c| CandidateBody {
                    token: c.token,
                    probability: c.probability,
                })
                .collect(),
            order_used: s.order_used,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    })();
    counted(state.metrics(), result).map(Json)
}

async fn complete(State(state): State<AppState>, body: Bytes) -> Result<Json<CompleteResponse>, ApiError> {
    Metrics::bump(&state.metrics().complete);
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        let bundle = loaded(&worker)?;
        let req: CompleteRequest = parse_body(&body)?;
        let engine = parse_engine(req.engine.as_deref())?;
        let max_len = req.max_len.unwrap_or(DEFAULT_MAX_LEN).min(MAX_COMPLETE_LEN);
        let prefix = tokens_of(bundle, &req.prefix, "prefix")?;
        let c = bundle.complete_sentence(&prefix, engine, max_len)?;
        Ok(CompleteResponse {
            terminated_by: c.terminated_by.to_string(),
            tokens: c.tokens,
            steps: c.steps,
        })
    })
    .await
    .unwrap_or_else(|e| Err(ApiError::Internal(format!("completion task failed: {e}"))));
    counted(state.metrics(), result).map(Json)
}
