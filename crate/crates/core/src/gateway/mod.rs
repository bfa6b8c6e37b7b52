//! Access to the two generative backends: text-to-image and vision-language.
//!
//! Every backend speaks the same [`Backend`] trait over canonical JSON
//! requests, so live HTTP clients, the deterministic mock, and the replay
//! store are interchangeable. Replay fixtures are keyed by the SHA-256 of the
//! canonical request, which includes the prompt template version.

mod backend;
mod extract;
mod fixtures;
mod image;
mod limit;
mod live;
mod mock;
mod prompts;

pub use backend::{
    response_text, Backend, BackendKind, BackendRequest, BackendResponse, GatewayMode, SharedBackend,
};
pub use extract::{
    extract_materials, parse_material_lines, ExtractionFilter, ExtractionResult, FilteredLine,
    DEFAULT_BLOCKLIST, DEFAULT_FLAG_TERMS, MAX_MATERIALS,
};
pub use fixtures::{record_fixture, FixtureMeta, FixtureStore, RecordingBackend, ReplayBackend};
pub use image::{
    decode_base64, encode_base64, generate_image, GeneratedImage, ImageOptions, ImageRef, MediaType,
};
pub use limit::Throttled;
pub use live::{ApiKey, LiveConfig, LiveImageBackend, LiveVisionBackend, T2I_API_KEY_ENV, VLM_API_KEY_ENV};
pub use mock::{MockImageBackend, MockVisionBackend, ScriptedBackend, MOCK_MATERIAL_POOL};
pub use prompts::PromptTemplates;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub const GATEWAY_MODE_ENV: &str = "GATEWAY_MODE";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("EmptyPrompt: prompt is empty")]
    EmptyPrompt,
    #[error("PromptTooLong: prompt has {len} characters, limit is {max}")]
    PromptTooLong { len: usize, max: usize },
    #[error("ReplayMiss: no fixture recorded for request {key}")]
    ReplayMiss { key: String },
    #[error("BackendUnavailable: {message}{}", retry_hint(*.retry_after_secs))]
    BackendUnavailable { message: String, retry_after_secs: Option<u64> },
    #[error("MalformedResponse: {0}")]
    MalformedResponse(String),
    #[error("ExtractionParseError: no material list found in response")]
    ExtractionParse { raw: String },
    #[error("StorageError: {0}")]
    Storage(String),
}

fn retry_hint(secs: Option<u64>) -> String {
    secs.map(|s| format!(" (retry after {s}s)")).unwrap_or_default()
}

impl GatewayError {
    pub fn unavailable(message: impl Into<String>) -> Self {
        GatewayError::BackendUnavailable { message: message.into(), retry_after_secs: None }
    }

    /// Stable variant name, used as the error kind in staged messages.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::EmptyPrompt => "EmptyPrompt",
            GatewayError::PromptTooLong { .. } => "PromptTooLong",
            GatewayError::ReplayMiss { .. } => "ReplayMiss",
            GatewayError::BackendUnavailable { .. } => "BackendUnavailable",
            GatewayError::MalformedResponse(_) => "MalformedResponse",
            GatewayError::ExtractionParse { .. } => "ExtractionParseError",
            GatewayError::Storage(_) => "StorageError",
        }
    }
}

/// How to construct the backends for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    /// Fixture directory; required for replay, optional for live/mock
    /// (when set in those modes, responses are recorded into it).
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    #[serde(default)]
    pub live: LiveConfig,
    #[serde(default)]
    pub prompts: PromptTemplates,
    #[serde(default = "default_inflight")]
    pub inflight: usize,
    /// Minimum spacing between calls to one backend, in milliseconds.
    #[serde(default)]
    pub min_interval_ms: u64,
}

fn default_inflight() -> usize {
    4
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            mode: GatewayMode::Mock,
            fixtures: None,
            live: LiveConfig::default(),
            prompts: PromptTemplates::default(),
            inflight: default_inflight(),
            min_interval_ms: 0,
        }
    }
}

/// The pair of backends a pipeline talks to.
#[derive(Clone)]
pub struct Backends {
    pub t2i: SharedBackend,
    pub vlm: SharedBackend,
}

impl std::fmt::Debug for Backends {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backends")
            .field("t2i", &self.t2i.label())
            .field("vlm", &self.vlm.label())
            .finish()
    }
}

impl Backends {
    /// Build backends for the configured mode. Live credentials come from
    /// the environment only.
    pub fn from_config(config: &GatewayConfig) -> Result<Backends, GatewayError> {
        let (t2i, vlm): (SharedBackend, SharedBackend) = match config.mode {
            GatewayMode::Replay => {
                let dir = config.fixtures.clone().ok_or_else(|| {
                    GatewayError::Storage("replay mode needs a fixture directory".into())
                })?;
                let store = Arc::new(FixtureStore::open(&dir)?);
                (
                    Arc::new(ReplayBackend::new(store.clone(), "replay:t2i")),
                    Arc::new(ReplayBackend::new(store, "replay:vlm")),
                )
            }
            GatewayMode::Mock => (Arc::new(MockImageBackend), Arc::new(MockVisionBackend)),
            GatewayMode::Live => (
                Arc::new(LiveImageBackend::from_env(&config.live)?),
                Arc::new(LiveVisionBackend::from_env(&config.live)?),
            ),
        };
        let (t2i, vlm) = match (&config.fixtures, config.mode) {
            (Some(dir), GatewayMode::Live | GatewayMode::Mock) => {
                let store = Arc::new(FixtureStore::open(dir)?);
                (
                    Arc::new(RecordingBackend::new(t2i, store.clone())) as SharedBackend,
                    Arc::new(RecordingBackend::new(vlm, store)) as SharedBackend,
                )
            }
            _ => (t2i, vlm),
        };
        let interval = std::time::Duration::from_millis(config.min_interval_ms);
        Ok(Backends {
            t2i: Arc::new(Throttled::new(t2i, config.inflight, interval)),
            vlm: Arc::new(Throttled::new(vlm, config.inflight, interval)),
        })
    }
}
