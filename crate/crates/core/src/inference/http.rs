use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{parse_response, ChatRequest, ChatResponse, DecodingConfig, InferenceError, TextModel};
#[cfg(feature = "media")]
use super::VisionModel;
#[cfg(feature = "media")]
use crate::media::FrameRecord;
use crate::prompting::PromptPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpClientConfig {
    pub base_url: String,
    pub model: String,
    /// Sent as a bearer token when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub timeout_s: f64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub parallelism: usize,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: String::new(),
            api_key: None,
            timeout_s: 120.0,
            retries: 3,
            backoff_ms: 500,
            parallelism: 4,
        }
    }
}

/// Client for an OpenAI-compatible chat-completions server.
///
/// Cheap to clone; clones share the connection pool and the in-flight limit.
#[derive(Clone)]
pub struct HttpChatClient {
    config: Arc<HttpClientConfig>,
    endpoint: String,
    client: reqwest::Client,
    in_flight: Arc<Semaphore>,
}

impl std::fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.config.model)
            .finish()
    }
}

enum Attempt {
    Retry(InferenceError),
    Fatal(InferenceError),
}

impl HttpChatClient {
    pub fn new(config: HttpClientConfig) -> Result<Self, InferenceError> {
        if config.model.trim().is_empty() {
            return Err(InferenceError::InvalidRequest("model id is empty".into()));
        }
        if !(config.timeout_s.is_finite() && config.timeout_s > 0.0) {
            return Err(InferenceError::InvalidRequest("timeout must be positive".into()));
        }
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| InferenceError::InvalidRequest(e.to_string()))?;
        let endpoint = format!("{}/v1/chat/completions", config.base_url.trim_end_matches('/'));
        let permits = config.parallelism.max(1);
        Ok(Self {
            config: Arc::new(config),
            endpoint,
            client,
            in_flight: Arc::new(Semaphore::new(permits)),
        })
    }

    pub fn config(&self) -> &HttpClientConfig {
        &self.config
    }

    /// Sends `request`, retrying transport failures, timeouts, 429 and 5xx up to
    /// `retries` times with the same payload and exponential backoff.
    pub async fn send(&self, request: &ChatRequest) -> Result<ChatResponse, InferenceError> {
        request.validate()?;
        let body = request.to_wire();
        let _permit = self.in_flight.acquire().await.expect("semaphore never closed");
        let attempts = self.config.retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                tokio::time::sleep(Duration::from_millis(delay)).await;
            }
            match self.attempt(&body, attempt + 1).await {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    tracing::warn!(endpoint = %self.endpoint, attempt = attempt + 1, error = %e, "chat request failed");
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    async fn attempt(&self, body: &serde_json::Value, attempt: u32) -> Result<ChatResponse, Attempt> {
        let started = Instant::now();
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                Attempt::Retry(InferenceError::Timeout {
                    attempts: attempt,
                    timeout_ms: (self.config.timeout_s * 1000.0) as u64,
                })
            } else {
                Attempt::Retry(InferenceError::EndpointUnreachable {
                    url: self.endpoint.clone(),
                    attempts: attempt,
                    reason: e.to_string(),
                })
            }
        };
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(transport)?;
        if !status.is_success() {
            let err = InferenceError::HttpError {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&bytes).chars().take(512).collect(),
            };
            return Err(if status.is_server_error() || status.as_u16() == 429 {
                Attempt::Retry(err)
            } else {
                Attempt::Fatal(err)
            });
        }
        parse_response(&bytes, started.elapsed().as_millis() as u64).map_err(Attempt::Fatal)
    }
}

#[async_trait]
impl TextModel for HttpChatClient {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    async fn complete(&self, prompts: &PromptPair, decoding: &DecodingConfig) -> Result<String, InferenceError> {
        let req = ChatRequest::text(&self.config.model, prompts, decoding);
        Ok(self.send(&req).await?.text)
    }
}

#[cfg(feature = "media")]
#[async_trait]
impl VisionModel for HttpChatClient {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    async fn caption(
        &self,
        frame: &FrameRecord,
        prompts: &PromptPair,
        decoding: &DecodingConfig,
    ) -> Result<String, InferenceError> {
        let req = ChatRequest::vision(&self.config.model, prompts, frame, decoding)?;
        Ok(self.send(&req).await?.text)
    }
}
