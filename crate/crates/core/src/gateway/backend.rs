use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::GatewayError;
use crate::canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    T2i,
    VlmExtract,
    VlmMatch,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::T2i => "t2i",
            BackendKind::VlmExtract => "vlm_extract",
            BackendKind::VlmMatch => "vlm_match",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    Live,
    Mock,
    Replay,
}

impl GatewayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GatewayMode::Live => "live",
            GatewayMode::Mock => "mock",
            GatewayMode::Replay => "replay",
        }
    }
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(GatewayMode::Live),
            "mock" => Ok(GatewayMode::Mock),
            "replay" => Ok(GatewayMode::Replay),
            other => Err(format!("unknown gateway mode {other:?} (expected live, replay or mock)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub kind: BackendKind,
    pub payload: Value,
}

impl BackendRequest {
    pub fn new(kind: BackendKind, payload: Value) -> Self {
        BackendRequest { kind, payload }
    }

    /// Content key of this request: SHA-256 over its canonical JSON.
    pub fn fixture_key(&self) -> String {
        canonical::hash_canonical(self).expect("request payload is plain JSON")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub payload: Value,
    pub latency_ms: u64,
    pub mode: GatewayMode,
}

/// A stateless request/response client for one generative backend.
pub trait Backend: Send + Sync {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError>;

    /// Short label recorded on generated artifacts, e.g. `mock:t2i`.
    fn label(&self) -> String;

    fn mode(&self) -> GatewayMode;
}

pub type SharedBackend = Arc<dyn Backend>;

/// Pull the `text` field out of a vision-language response payload.
pub fn response_text(response: &BackendResponse) -> Result<String, GatewayError> {
    response
        .payload
        .get("text")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::MalformedResponse("response payload has no text field".into()))
}
