use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde_json::Value;

use super::InsightError;
use crate::gateway::ApiKey;
use crate::materials::MaterialRecord;

pub const MATERIALS_API_KEY_ENV: &str = "MATERIALS_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RemoteError {
    #[error("record not found remotely")]
    NotFound,
    #[error("remote unavailable: {0}")]
    Unavailable(String),
}

/// Source of fresher copies of dataset records.
pub trait MaterialsRemote: Send + Sync {
    fn fetch(&self, id: u64) -> Result<MaterialRecord, RemoteError>;
}

/// Remote lookups with a per-record TTL cache in front.
///
/// The local dataset stays authoritative for availability: a remote failure
/// degrades to the cached or local copy with a note, never to an error,
/// unless no copy exists anywhere.
pub struct RemoteCache {
    remote: Arc<dyn MaterialsRemote>,
    ttl: Duration,
    entries: Mutex<HashMap<u64, (Instant, MaterialRecord)>>,
}

impl RemoteCache {
    pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);

    pub fn new(remote: Arc<dyn MaterialsRemote>, ttl: Duration) -> Self {
        RemoteCache { remote, ttl, entries: Mutex::new(HashMap::new()) }
    }

    /// Resolve `id`, preferring a fresh remote copy. Returns the record and
    /// a note when the value is not fresh.
    pub fn resolve(
        &self,
        id: u64,
        local: Option<&MaterialRecord>,
    ) -> Result<(MaterialRecord, Option<String>), InsightError> {
        let cached = self.entries.lock().unwrap_or_else(|e| e.into_inner()).get(&id).cloned();
        if let Some((at, record)) = &cached {
            if at.elapsed() < self.ttl {
                return Ok((record.clone(), None));
            }
        }
        let failure = match self.remote.fetch(id) {
            Ok(record) if record.id == id && record.violations().is_empty() => {
                self.entries
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .insert(id, (Instant::now(), record.clone()));
                return Ok((record, None));
            }
            Ok(_) => "remote returned an invalid record".to_string(),
            Err(RemoteError::NotFound) => "remote has no such record".to_string(),
            Err(RemoteError::Unavailable(msg)) => format!("remote unavailable ({msg})"),
        };
        if let Some((at, record)) = cached {
            return Ok((record, Some(format!("{failure}; using cached copy from {}s ago", at.elapsed().as_secs()))));
        }
        match local {
            Some(record) => Ok((record.clone(), Some(format!("{failure}; using local snapshot")))),
            None => Err(InsightError::UnknownMaterial(id)),
        }
    }
}

/// Fetches records as JSON from `GET {base_url}/materials/{id}`. The body
/// may be the record itself or `{"data": record}`.
pub struct HttpMaterialsRemote {
    client: Client,
    base_url: String,
    key: Option<ApiKey>,
}

impl HttpMaterialsRemote {
    pub fn new(base_url: impl Into<String>, key: Option<ApiKey>, timeout: Duration) -> Result<Self, RemoteError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| RemoteError::Unavailable(e.to_string()))?;
        Ok(HttpMaterialsRemote { client, base_url: base_url.into().trim_end_matches('/').to_string(), key })
    }

    pub fn from_env(base_url: impl Into<String>) -> Result<Self, RemoteError> {
        Self::new(base_url, ApiKey::from_env(MATERIALS_API_KEY_ENV).ok(), Duration::from_secs(30))
    }
}

impl MaterialsRemote for HttpMaterialsRemote {
    fn fetch(&self, id: u64) -> Result<MaterialRecord, RemoteError> {
        let url = format!("{}/materials/{id}", self.base_url);
        let mut request = self.client.get(&url);
        if let Some(key) = &self.key {
            request = request.bearer_auth(key_text(key));
        }
        let response = request
            .send()
            .map_err(|e| RemoteError::Unavailable(e.without_url().to_string()))?;
        if response.status() == reqwest::StatusCode::NOT_FOUND {
            return Err(RemoteError::NotFound);
        }
        if !response.status().is_success() {
            return Err(RemoteError::Unavailable(format!("status {}", response.status())));
        }
        let body: Value = response.json().map_err(|e| RemoteError::Unavailable(e.without_url().to_string()))?;
        let record = body.get("data").cloned().unwrap_or(body);
        serde_json::from_value(record).map_err(|e| RemoteError::Unavailable(format!("bad record: {e}")))
    }
}

fn key_text(key: &ApiKey) -> String {
    // ApiKey deliberately has no Display; the bearer header is the only exit.
    key.bearer().trim_start_matches("Bearer ").to_string()
}
