use std::fmt;
use std::time::{Duration, Instant};

use chrono::Utc;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendKind, BackendRequest, BackendResponse, GatewayError, GatewayMode};

pub const T2I_API_KEY_ENV: &str = "T2I_API_KEY";
pub const VLM_API_KEY_ENV: &str = "VLM_API_KEY";

/// A bearer credential. Never printed: `Debug` is redacted and there is no
/// `Display`.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(secret: impl Into<String>) -> Self {
        ApiKey(secret.into())
    }

    pub fn from_env(var: &str) -> Result<ApiKey, GatewayError> {
        match std::env::var(var) {
            Ok(v) if !v.trim().is_empty() => Ok(ApiKey(v.trim().to_string())),
            _ => Err(GatewayError::unavailable(format!("live mode needs the {var} environment variable"))),
        }
    }

    pub(crate) fn bearer(&self) -> String {
        format!("Bearer {}", self.0)
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

/// Endpoints and models for live mode. Both speak the OpenAI-style JSON
/// wire format (images/generations and chat/completions).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub t2i_endpoint: String,
    pub t2i_model: String,
    /// Passed through as `size` when set; otherwise the backend default.
    #[serde(default)]
    pub image_size: Option<String>,
    pub vlm_endpoint: String,
    pub vlm_model: String,
    pub timeout_secs: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            t2i_endpoint: "https://api.openai.com/v1/images/generations".into(),
            t2i_model: "dall-e-3".into(),
            image_size: None,
            vlm_endpoint: "https://api.openai.com/v1/chat/completions".into(),
            vlm_model: "gpt-4o".into(),
            timeout_secs: 120,
        }
    }
}

fn client(timeout_secs: u64) -> Result<Client, GatewayError> {
    Client::builder()
        .timeout(Duration::from_secs(timeout_secs))
        .build()
        .map_err(|e| GatewayError::unavailable(format!("cannot build HTTP client: {e}")))
}

fn post_json(client: &Client, url: &str, key: &ApiKey, body: &Value) -> Result<(Value, u64), GatewayError> {
    let started = Instant::now();
    let response = client
        .post(url)
        .header(reqwest::header::AUTHORIZATION, key.bearer())
        .json(body)
        .send()
        .map_err(|e| GatewayError::unavailable(format!("request to {url} failed: {}", e.without_url())))?;
    let status = response.status();
    let retry_after_secs = response
        .headers()
        .get(reqwest::header::RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    if !status.is_success() {
        let message = match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => format!("authentication rejected by {url} ({status})"),
            _ => format!("{url} answered {status}"),
        };
        return Err(GatewayError::BackendUnavailable { message, retry_after_secs });
    }
    let value = response
        .json::<Value>()
        .map_err(|e| GatewayError::MalformedResponse(format!("{url} returned invalid JSON: {}", e.without_url())))?;
    Ok((value, started.elapsed().as_millis() as u64))
}

pub struct LiveImageBackend {
    client: Client,
    key: ApiKey,
    config: LiveConfig,
}

impl LiveImageBackend {
    pub fn new(config: &LiveConfig, key: ApiKey) -> Result<Self, GatewayError> {
        Ok(LiveImageBackend { client: client(config.timeout_secs)?, key, config: config.clone() })
    }

    pub fn from_env(config: &LiveConfig) -> Result<Self, GatewayError> {
        Self::new(config, ApiKey::from_env(T2I_API_KEY_ENV)?)
    }
}

impl Backend for LiveImageBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        if request.kind != BackendKind::T2i {
            return Err(GatewayError::MalformedResponse(format!("t2i backend cannot serve {}", request.kind.as_str())));
        }
        let p = &request.payload;
        let mut body = json!({
            "model": p.get("model").cloned().unwrap_or_else(|| self.config.t2i_model.clone().into()),
            "prompt": p.get("prompt").cloned().unwrap_or_default(),
            "n": 1,
            "response_format": "b64_json",
        });
        if let Some(size) = p.get("size").cloned().or_else(|| self.config.image_size.clone().map(Value::from)) {
            body["size"] = size;
        }
        let (value, latency_ms) = post_json(&self.client, &self.config.t2i_endpoint, &self.key, &body)?;
        let b64 = value
            .pointer("/data/0/b64_json")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::MalformedResponse("image response has no data[0].b64_json".into()))?;
        let created = value.get("created").cloned().unwrap_or_else(|| Utc::now().to_rfc3339().into());
        Ok(BackendResponse {
            payload: json!({ "b64_json": b64, "created": created }),
            latency_ms,
            mode: GatewayMode::Live,
        })
    }

    fn label(&self) -> String {
        format!("live:{}", self.config.t2i_model)
    }

    fn mode(&self) -> GatewayMode {
        GatewayMode::Live
    }
}

pub struct LiveVisionBackend {
    client: Client,
    key: ApiKey,
    config: LiveConfig,
}

impl LiveVisionBackend {
    pub fn new(config: &LiveConfig, key: ApiKey) -> Result<Self, GatewayError> {
        Ok(LiveVisionBackend { client: client(config.timeout_secs)?, key, config: config.clone() })
    }

    pub fn from_env(config: &LiveConfig) -> Result<Self, GatewayError> {
        Self::new(config, ApiKey::from_env(VLM_API_KEY_ENV)?)
    }

    fn messages(request: &BackendRequest) -> Result<Value, GatewayError> {
        let p = &request.payload;
        match request.kind {
            BackendKind::VlmExtract => {
                let instruction = p.get("instruction").and_then(Value::as_str).unwrap_or_default();
                let image = p.get("image_b64").and_then(Value::as_str).unwrap_or_default();
                let media = if image.starts_with("/9j/") { "image/jpeg" } else { "image/png" };
                Ok(json!([{
                    "role": "user",
                    "content": [
                        { "type": "text", "text": instruction },
                        { "type": "image_url", "image_url": { "url": format!("data:{media};base64,{image}") } }
                    ]
                }]))
            }
            BackendKind::VlmMatch => {
                let prompt = p.get("prompt").and_then(Value::as_str).unwrap_or_default();
                Ok(json!([{ "role": "user", "content": prompt }]))
            }
            BackendKind::T2i => Err(GatewayError::MalformedResponse("vision backend cannot generate images".into())),
        }
    }
}

impl Backend for LiveVisionBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        let body = json!({
            "model": self.config.vlm_model,
            "messages": Self::messages(request)?,
            "temperature": 0,
        });
        let (value, latency_ms) = post_json(&self.client, &self.config.vlm_endpoint, &self.key, &body)?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::MalformedResponse("chat response has no choices[0].message.content".into()))?;
        Ok(BackendResponse { payload: json!({ "text": text }), latency_ms, mode: GatewayMode::Live })
    }

    fn label(&self) -> String {
        format!("live:{}", self.config.vlm_model)
    }

    fn mode(&self) -> GatewayMode {
        GatewayMode::Live
    }
}
