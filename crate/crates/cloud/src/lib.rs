//! Cloud question-answering service.
//!
//! `POST /v1/ask` takes a question, its options and a transcript, either
//! inline or by id (pulled from the edge service), and answers with the text
//! model. Requests are run through the privacy gate before they are parsed;
//! a request carrying image data is rejected with 422. This crate links the
//! core library without its `media` feature, so it has no image codec at all.

use std::sync::Arc;

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use logat_core::gateway::{self, AskRequest, ErrorBody, Violation};
use logat_core::inference::{DecodingConfig, HttpChatClient, HttpClientConfig, InferenceError, MockLlm, TextModel};
use logat_core::qa::{self, QaError};
use logat_core::{privacy_gate, Prediction, QAItem, RunConfig, Transcript};

const MAX_REQUEST_BYTES: usize = 16 << 20;

#[derive(Debug, Clone)]
pub struct CloudConfig {
    pub llm: HttpClientConfig,
    pub llm_decoding: DecodingConfig,
    /// Use the deterministic mock model instead of `llm`.
    pub mock: bool,
    /// Base URL of the edge service for pulling transcripts by id.
    pub edge_url: Option<String>,
    pub edge_token: Option<String>,
    /// Shared bearer token for this service; `None` disables auth.
    pub token: Option<String>,
}

impl CloudConfig {
    pub fn from_run(run: &RunConfig) -> Self {
        Self {
            llm: run.llm.clone(),
            llm_decoding: run.llm_decoding.clone(),
            mock: run.mock,
            edge_url: None,
            edge_token: None,
            token: None,
        }
    }
}

struct Inner {
    llm: Arc<dyn TextModel>,
    decoding: DecodingConfig,
    edge_url: Option<String>,
    edge_token: Option<String>,
    token: Option<String>,
    http: reqwest::Client,
}

#[derive(Clone)]
pub struct CloudState(Arc<Inner>);

impl CloudState {
    pub fn new(config: CloudConfig) -> Result<Self, InferenceError> {
        let llm: Arc<dyn TextModel> = if config.mock {
            Arc::new(MockLlm)
        } else {
            Arc::new(HttpChatClient::new(config.llm.clone())?)
        };
        Self::with_model(config, llm)
    }

    pub fn with_model(config: CloudConfig, llm: Arc<dyn TextModel>) -> Result<Self, InferenceError> {
        config.llm_decoding.validate()?;
        let http = reqwest::Client::builder()
            .timeout(std::time::Duration::from_secs_f64(config.llm.timeout_s))
            .build()
            .map_err(|e| InferenceError::InvalidRequest(e.to_string()))?;
        Ok(Self(Arc::new(Inner {
            llm,
            decoding: config.llm_decoding,
            edge_url: config.edge_url.map(|u| u.trim_end_matches('/').to_string()),
            edge_token: config.edge_token,
            token: config.token,
            http,
        })))
    }
}

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

    fn privacy(violations: Vec<Violation>, what: &str) -> Self {
        let mut e = Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "privacy_violation",
            format!("{what} failed the privacy gate"),
        );
        e.body.violations = violations;
        e
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<QaError> for ApiError {
    fn from(e: QaError) -> Self {
        match e {
            QaError::EmptyTranscript => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_transcript", e.to_string()),
            QaError::Prompt(p) => ApiError::new(StatusCode::BAD_REQUEST, "bad_request", p.to_string()),
            QaError::Inference(
                ref i @ (InferenceError::EndpointUnreachable { .. } | InferenceError::Timeout { .. }),
            ) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "llm_unavailable", i.to_string()),
            QaError::Inference(i @ InferenceError::InvalidRequest(_)) => {
                ApiError::new(StatusCode::BAD_REQUEST, "bad_request", i.to_string())
            }
            QaError::Inference(i) => ApiError::new(StatusCode::BAD_GATEWAY, "llm_error", i.to_string()),
        }
    }
}

fn content_type(headers: &HeaderMap) -> &str {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
}

async fn pull_transcript(state: &Inner, id: &str) -> Result<String, ApiError> {
    let unknown = || ApiError::new(StatusCode::NOT_FOUND, "unknown_transcript", format!("no transcript `{id}`"));
    if !(id.len() == 64 && id.bytes().all(|b| b.is_ascii_hexdigit())) {
        return Err(unknown());
    }
    let Some(edge) = &state.edge_url else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "pull_disabled",
            "no edge service configured; send the transcript inline",
        ));
    };
    let mut req = state.http.get(format!("{edge}/v1/transcripts/{id}"));
    if let Some(t) = &state.edge_token {
        req = req.bearer_auth(t);
    }
    let resp = req
        .send()
        .await
        .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "edge_unavailable", e.to_string()))?;
    match resp.status() {
        s if s.is_success() => {}
        reqwest::StatusCode::NOT_FOUND => return Err(unknown()),
        s => {
            return Err(ApiError::new(
                StatusCode::BAD_GATEWAY,
                "edge_error",
                format!("edge answered {s}"),
            ))
        }
    }
    let ct = resp
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    let body = resp
        .bytes()
        .await
        .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "edge_unavailable", e.to_string()))?;
    let verdict = privacy_gate(&body, &ct);
    if !verdict.ok {
        return Err(ApiError::privacy(verdict.violations, "transcript from edge"));
    }
    String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::new(StatusCode::BAD_GATEWAY, "edge_error", "transcript is not UTF-8"))
}

/// Answers one question; the HTTP handler and in-process callers share this.
pub async fn ask(state: &CloudState, req: AskRequest) -> Result<Prediction, ApiError> {
    let (text, expected_id) = match (req.transcript, req.transcript_id) {
        (Some(inline), None) => (inline, None),
        (None, Some(id)) => (pull_transcript(&state.0, &id).await?, Some(id)),
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                "set exactly one of `transcript_id` or `transcript`",
            ))
        }
    };
    let transcript = Transcript::from_jsonl(&text)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_transcript", e.to_string()))?;
    if let Some(id) = expected_id {
        if transcript.digest() != id {
            return Err(ApiError::new(
                StatusCode::BAD_GATEWAY,
                "digest_mismatch",
                "edge returned a transcript that does not match its id",
            ));
        }
    }
    let item = QAItem {
        question_id: req.question_id.unwrap_or_else(|| "ask".to_string()),
        video_id: transcript.source_id.clone(),
        category: String::new(),
        question: req.question,
        options: req.options,
        gold_index: None,
    };
    if item.question.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "question is empty"));
    }
    Ok(qa::answer(&transcript, &item, state.0.llm.as_ref(), &state.0.decoding).await?)
}

async fn ask_handler(State(state): State<CloudState>, headers: HeaderMap, body: Bytes) -> Result<Json<Prediction>, ApiError> {
    let verdict = privacy_gate(&body, content_type(&headers));
    if !verdict.ok {
        tracing::warn!(violations = ?verdict.violations, "rejected request carrying image data");
        return Err(ApiError::privacy(verdict.violations, "request"));
    }
    let req: AskRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
    Ok(Json(ask(&state, req).await?))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "service": "cloud" }))
}

pub fn bearer_matches(header: Option<&HeaderValue>, token: &str) -> bool {
    header
        .and_then(|h| h.to_str().ok())
        .and_then(|h| h.strip_prefix("Bearer "))
        .is_some_and(|t| t == token)
}

async fn require_token(State(state): State<CloudState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.token {
        if !bearer_matches(req.headers().get(header::AUTHORIZATION), token) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

/// Request log with digests only, plus the same gate on the way out.
async fn audit(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let (parts, body) = req.into_parts();
    let Ok(req_bytes) = to_bytes(body, MAX_REQUEST_BYTES).await else {
        return ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", "request body too large").into_response();
    };
    let req_digest = gateway::payload_digest(&req_bytes);
    let resp = next.run(Request::from_parts(parts, Body::from(req_bytes))).await;
    let (mut parts, body) = resp.into_parts();
    let Ok(bytes) = to_bytes(body, usize::MAX).await else {
        return ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "unreadable response").into_response();
    };
    let verdict = privacy_gate(&bytes, content_type(&parts.headers));
    if !verdict.ok {
        tracing::error!(%method, %path, violations = ?verdict.violations, "response blocked by privacy gate");
        let mut e = ApiError::privacy(verdict.violations, "response");
        e.status = StatusCode::INTERNAL_SERVER_ERROR;
        return e.into_response();
    }
    tracing::info!(
        %method,
        %path,
        status = parts.status.as_u16(),
        request_digest = %req_digest,
        response_digest = %gateway::payload_digest(&bytes),
        "cloud request"
    );
    parts.headers.remove(header::CONTENT_LENGTH);
    Response::from_parts(parts, Body::from(bytes))
}

pub fn router(state: CloudState) -> Router {
    let api = Router::new()
        .route("/v1/ask", post(ask_handler))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/healthz", get(healthz))
        .merge(api)
        .layer(middleware::from_fn(audit))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: CloudState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
