//! Chat-style model inference: a text-only model for question answering and a
//! vision model for frame captioning.
//!
//! The wire protocol is the OpenAI-compatible `/v1/chat/completions` JSON API.
//! Image payloads can only be attached through [`ChatRequest::vision`], which
//! exists only with the `media` feature.

mod http;
pub mod mock;

use async_trait::async_trait;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[cfg(feature = "media")]
use crate::media::FrameRecord;
use crate::prompting::PromptPair;

pub use http::{HttpChatClient, HttpClientConfig};
pub use mock::MockLlm;
#[cfg(feature = "media")]
pub use mock::MockVlm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("endpoint {url} unreachable after {attempts} attempt(s): {reason}")]
    EndpointUnreachable {
        url: String,
        attempts: u32,
        reason: String,
    },
    #[error("endpoint returned HTTP {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request timed out after {attempts} attempt(s) of {timeout_ms} ms")]
    Timeout { attempts: u32, timeout_ms: u64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("could not encode frame: {0}")]
    Encode(String),
}

/// Sampling parameters passed through to the server verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub min_new_tokens: u32,
    pub max_new_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DecodingConfig {
    /// Captioning defaults: temperature 1.0, 100 to 1000 new tokens.
    pub fn vlm_default() -> Self {
        Self {
            temperature: 1.0,
            min_new_tokens: 100,
            max_new_tokens: 1000,
            seed: None,
        }
    }

    /// Question-answering defaults: temperature 0.1.
    pub fn llm_default() -> Self {
        Self {
            temperature: 0.1,
            min_new_tokens: 1,
            max_new_tokens: 256,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(InferenceError::InvalidRequest(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if self.min_new_tokens == 0 || self.min_new_tokens > self.max_new_tokens {
            return Err(InferenceError::InvalidRequest(format!(
                "need 1 <= min_new_tokens <= max_new_tokens, got {} and {}",
                self.min_new_tokens, self.max_new_tokens
            )));
        }
        Ok(())
    }
}

/// PNG bytes of a frame, ready to be attached to a vision request.
#[derive(Clone, PartialEq, Eq)]
pub struct PngImage(Vec<u8>);

impl std::fmt::Debug for PngImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PngImage({} bytes)", self.0.len())
    }
}

impl PngImage {
    #[cfg(feature = "media")]
    pub fn from_frame(frame: &FrameRecord) -> Result<Self, InferenceError> {
        frame
            .encode_png()
            .map(PngImage)
            .map_err(|e| InferenceError::Encode(e.to_string()))
    }

    pub fn data_uri(&self) -> String {
        format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(&self.0)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub system: Option<String>,
    pub user: String,
    image: Option<PngImage>,
    pub decoding: DecodingConfig,
}

impl ChatRequest {
    /// Text-only request. A `ModelDefault` system prompt produces no system message.
    pub fn text(model_id: impl Into<String>, prompts: &PromptPair, decoding: &DecodingConfig) -> Self {
        Self {
            model_id: model_id.into(),
            system: prompts.system.as_text().map(str::to_string),
            user: prompts.user.clone(),
            image: None,
            decoding: decoding.clone(),
        }
    }

    #[cfg(feature = "media")]
    pub fn vision(
        model_id: impl Into<String>,
        prompts: &PromptPair,
        frame: &FrameRecord,
        decoding: &DecodingConfig,
    ) -> Result<Self, InferenceError> {
        let mut req = Self::text(model_id, prompts, decoding);
        req.image = Some(PngImage::from_frame(frame)?);
        Ok(req)
    }

    pub fn has_image(&self) -> bool {
        self.image.is_some()
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.user.trim().is_empty() {
            return Err(InferenceError::InvalidRequest("user message is empty".into()));
        }
        if self.system.as_deref().is_some_and(|s| s.trim().is_empty()) {
            return Err(InferenceError::InvalidRequest("system message is empty".into()));
        }
        self.decoding.validate()
    }

    /// Chat-completions request body. `min_tokens` is a non-standard extension
    /// that some servers ignore.
    pub fn to_wire(&self) -> Value {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &self.system {
            messages.push(json!({ "role": "system", "content": system }));
        }
        let user = match &self.image {
            None => json!({ "role": "user", "content": self.user }),
            Some(img) => json!({
                "role": "user",
                "content": [
                    { "type": "text", "text": self.user },
                    { "type": "image_url", "image_url": { "url": img.data_uri() } },
                ],
            }),
        };
        messages.push(user);
        let mut body = json!({
            "model": self.model_id,
            "messages": messages,
            "temperature": self.decoding.temperature,
            "max_tokens": self.decoding.max_new_tokens,
            "min_tokens": self.decoding.min_new_tokens,
            "stream": false,
        });
        if let Some(seed) = self.decoding.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub token_count: u64,
    pub latency_ms: u64,
}

/// Extracts `choices[0].message.content` and usage from a chat-completions body.
pub fn parse_response(body: &[u8], latency_ms: u64) -> Result<ChatResponse, InferenceError> {
    #[derive(Deserialize)]
    struct Body {
        choices: Vec<Choice>,
        #[serde(default)]
        usage: Option<Usage>,
    }
    #[derive(Deserialize)]
    struct Choice {
        message: Message,
    }
    #[derive(Deserialize)]
    struct Message {
        content: Option<String>,
    }
    #[derive(Deserialize)]
    struct Usage {
        #[serde(default)]
        completion_tokens: u64,
    }
    let parsed: Body =
        serde_json::from_slice(body).map_err(|e| InferenceError::MalformedResponse(e.to_string()))?;
    let text = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| InferenceError::MalformedResponse("no choices[0].message.content".into()))?;
    if text.trim().is_empty() {
        return Err(InferenceError::MalformedResponse("empty completion".into()));
    }
    Ok(ChatResponse {
        text,
        token_count: parsed.usage.map_or(0, |u| u.completion_tokens),
        latency_ms,
    })
}

/// A text-only language model.
#[async_trait]
pub trait TextModel: Send + Sync {
    fn model_id(&self) -> &str;

    async fn complete(&self, prompts: &PromptPair, decoding: &DecodingConfig) -> Result<String, InferenceError>;
}

/// A vision-language model that captions one frame per call.
#[cfg(feature = "media")]
#[async_trait]
pub trait VisionModel: Send + Sync {
    fn model_id(&self) -> &str;

    async fn caption(
        &self,
        frame: &FrameRecord,
        prompts: &PromptPair,
        decoding: &DecodingConfig,
    ) -> Result<String, InferenceError>;
}
