//! Edge transcription service.
//!
//! Videos live on the edge host under a video root. `POST /v1/transcribe`
//! captions one of them with the vision model and stores the transcript;
//! `GET /v1/transcripts/{id}` serves the stored `.glt.jsonl` body. Every
//! response body is run through the privacy gate before it is sent, and a
//! body that fails the gate is replaced by an error.

mod store;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Path as UrlPath, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use logat_core::eval::{MediaLocator, Models};
use logat_core::frame::DecoderCommand;
use logat_core::gateway::{self, ErrorBody, TranscribeRequest, TranscriptManifest};
use logat_core::inference::InferenceError;
use logat_core::media::MediaError;
use logat_core::pipeline::{load_media_async, transcribe_sequence, PipelineError};
use logat_core::{privacy_gate, ConfigError, RunConfig};

pub use store::{is_transcript_id, TranscriptStore};

const VIDEO_EXTENSIONS: [&str; 6] = ["mp4", "mkv", "avi", "webm", "mov", "m4v"];
const MAX_REQUEST_BYTES: usize = 1 << 20;
pub const JSONL_CONTENT_TYPE: &str = "application/x-ndjson";

#[derive(Debug, Clone)]
pub struct EdgeConfig {
    pub run: RunConfig,
    /// Directory holding `<video_id>/` frame dirs or `<video_id>.<ext>` files.
    pub video_root: PathBuf,
    pub store_dir: PathBuf,
    /// Shared bearer token; `None` disables auth.
    pub token: Option<String>,
}

struct Inner {
    run: RunConfig,
    video_root: PathBuf,
    store: TranscriptStore,
    models: Models,
    token: Option<String>,
}

#[derive(Clone)]
pub struct EdgeState(Arc<Inner>);

impl EdgeState {
    pub fn new(config: EdgeConfig) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let models = Models::from_config(&config.run)?;
        Self::with_models(config, models)
    }

    pub fn with_models(config: EdgeConfig, models: Models) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        config.run.validate()?;
        let store = TranscriptStore::open(&config.store_dir)?;
        Ok(Self(Arc::new(Inner {
            run: config.run,
            video_root: config.video_root,
            store,
            models,
            token: config.token,
        })))
    }

    pub fn store(&self) -> &TranscriptStore {
        &self.0.store
    }
}

/// An error response with a JSON [`ErrorBody`].
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody::new(code, message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string())
    }
}

impl From<MediaError> for ApiError {
    fn from(e: MediaError) -> Self {
        match e {
            MediaError::DecoderNotFound(_) | MediaError::Io(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "decoder_unavailable", e.to_string())
            }
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "decode_failed", other.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Media(m) => m.into(),
            PipelineError::Inference(
                ref i @ (InferenceError::EndpointUnreachable { .. } | InferenceError::Timeout { .. }),
            ) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "vlm_unavailable", i.to_string()),
            PipelineError::Inference(i) => ApiError::new(StatusCode::BAD_GATEWAY, "vlm_error", i.to_string()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "transcription_failed", other.to_string()),
        }
    }
}

fn locate(root: &Path, video_id: &str) -> Option<MediaLocator> {
    let base = root.join(video_id);
    std::iter::once(base.clone())
        .chain(VIDEO_EXTENSIONS.iter().map(|ext| root.join(format!("{video_id}.{ext}"))))
        .find_map(|p| MediaLocator::from_path(&p))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "service": "edge" }))
}

async fn transcribe(State(state): State<EdgeState>, body: Bytes) -> Result<Json<TranscriptManifest>, ApiError> {
    let req: TranscribeRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
    if !gateway::is_safe_id(&req.video_id) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "invalid video_id"));
    }
    let locator = locate(&state.0.video_root, &req.video_id).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_video", format!("no video `{}`", req.video_id))
    })?;
    let mut cfg = state.0.run.clone();
    if let Some(mode) = req.config.mode {
        cfg.mode = mode;
    }
    if let Some(grid) = req.config.grid {
        cfg.grid = grid;
    }
    if let Some(fps) = req.config.fps {
        cfg.fps = fps;
    }
    cfg.validate()?;
    let decoder = DecoderCommand::parse(&cfg.decoder).unwrap_or_default();
    let seq = load_media_async(locator, cfg.fps, decoder).await?;
    let grid = cfg.effective_grid();
    let transcript = transcribe_sequence(
        &seq,
        cfg.mode,
        grid.as_ref(),
        state.0.models.vlm.as_ref(),
        &cfg.vlm_decoding,
        cfg.parallelism,
    )
    .await?;
    let manifest = state
        .0
        .store
        .put(&transcript)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_failed", e.to_string()))?;
    tracing::info!(video_id = %req.video_id, transcript_id = %manifest.transcript_id, entries = manifest.entry_count, "stored transcript");
    Ok(Json(manifest))
}

async fn get_transcript(State(state): State<EdgeState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let body = state
        .0
        .store
        .get(&id)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_failed", e.to_string()))?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_transcript", format!("no transcript `{id}`")))?;
    Ok(([(header::CONTENT_TYPE, JSONL_CONTENT_TYPE)], body).into_response())
}

async fn require_token(State(state): State<EdgeState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.token {
        if !bearer_matches(req.headers().get(header::AUTHORIZATION), token) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

pub fn bearer_matches(header: Option<&HeaderValue>, token: &str) -> bool {
    header
        .and_then(|h| h.to_str().ok())
        .and_then(|h| h.strip_prefix("Bearer "))
        .is_some_and(|t| t == token)
}

/// Logs request/response digests and blocks any response body the privacy
/// gate rejects.
async fn privacy_layer(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let (parts, body) = req.into_parts();
    let Ok(req_bytes) = to_bytes(body, MAX_REQUEST_BYTES).await else {
        return ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", "request body too large").into_response();
    };
    let req_digest = gateway::payload_digest(&req_bytes);
    let resp = next.run(Request::from_parts(parts, Body::from(req_bytes))).await;

    let (mut parts, body) = resp.into_parts();
    let bytes = match to_bytes(body, usize::MAX).await {
        Ok(b) => b,
        Err(e) => {
            return ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()).into_response();
        }
    };
    let content_type = parts
        .headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let verdict = privacy_gate(&bytes, content_type);
    if !verdict.ok {
        tracing::error!(%method, %path, violations = ?verdict.violations, "response blocked by privacy gate");
        let mut err = ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "privacy_violation",
            "response withheld: payload failed the privacy gate",
        );
        err.body.violations = verdict.violations;
        return err.into_response();
    }
    tracing::info!(
        %method,
        %path,
        status = parts.status.as_u16(),
        request_digest = %req_digest,
        response_digest = %gateway::payload_digest(&bytes),
        response_bytes = bytes.len(),
        "edge request"
    );
    parts.headers.remove(header::CONTENT_LENGTH);
    Response::from_parts(parts, Body::from(bytes))
}

pub fn router(state: EdgeState) -> Router {
    let api = Router::new()
        .route("/v1/transcribe", post(transcribe))
        .route("/v1/transcripts/{id}", get(get_transcript))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/healthz", get(healthz))
        .merge(api)
        .layer(middleware::from_fn(privacy_layer))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: EdgeState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
