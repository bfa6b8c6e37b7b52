use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, BackendKind, BackendRequest, BackendResponse, GatewayError, GatewayMode, SharedBackend};
use crate::canonical;

/// Sidecar written next to every recorded payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub key: String,
    pub kind: BackendKind,
    /// Request payload with any inline image replaced by its SHA-256.
    pub request: Value,
    pub latency_ms: u64,
    pub recorded_from: GatewayMode,
    pub recorded_at: DateTime<Utc>,
}

/// Directory of recorded responses, one `<key>.json` payload plus one
/// `<key>.meta.json` sidecar per request hash.
///
/// Reads may happen concurrently; writes are serialized by an internal lock
/// and land via rename so a reader never sees a partial file.
#[derive(Debug)]
pub struct FixtureStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl FixtureStore {
    pub fn open(dir: &Path) -> Result<FixtureStore, GatewayError> {
        fs::create_dir_all(dir)
            .map_err(|e| GatewayError::Storage(format!("cannot open fixture dir {}: {e}", dir.display())))?;
        Ok(FixtureStore { dir: dir.to_path_buf(), write_lock: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn payload_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn meta_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.meta.json"))
    }

    pub fn contains(&self, request: &BackendRequest) -> bool {
        self.payload_path(&request.fixture_key()).exists()
    }

    /// Persist `response` under the request's key and return that key.
    pub fn put(&self, request: &BackendRequest, response: &BackendResponse) -> Result<String, GatewayError> {
        let key = request.fixture_key();
        let meta = FixtureMeta {
            key: key.clone(),
            kind: request.kind,
            request: redact_images(&request.payload),
            latency_ms: response.latency_ms,
            recorded_from: response.mode,
            recorded_at: Utc::now(),
        };
        let payload = canonical::to_canonical_string(&response.payload).map_err(storage)?;
        let meta = canonical::to_canonical_pretty(&meta).map_err(storage)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        write_atomic(&self.payload_path(&key), payload.as_bytes())?;
        write_atomic(&self.meta_path(&key), meta.as_bytes())?;
        Ok(key)
    }

    pub fn get(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        let key = request.fixture_key();
        let bytes = match fs::read(self.payload_path(&key)) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(GatewayError::ReplayMiss { key })
            }
            Err(e) => return Err(storage(e)),
        };
        let payload: Value = serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::Storage(format!("fixture {key} is not valid JSON: {e}")))?;
        let latency_ms = fs::read(self.meta_path(&key))
            .ok()
            .and_then(|b| serde_json::from_slice::<FixtureMeta>(&b).ok())
            .map(|m| m.latency_ms)
            .unwrap_or(0);
        Ok(BackendResponse { payload, latency_ms, mode: GatewayMode::Replay })
    }

    /// Keys of every recorded payload, sorted.
    pub fn keys(&self) -> Result<Vec<String>, GatewayError> {
        let mut keys = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(storage)? {
            let name = entry.map_err(storage)?.file_name().to_string_lossy().into_owned();
            if let Some(key) = name.strip_suffix(".json") {
                if !key.ends_with(".meta") {
                    keys.push(key.to_string());
                }
            }
        }
        keys.sort();
        Ok(keys)
    }
}

/// Persist a live (or mock) response so later replays of the identical
/// request return it byte-for-byte.
pub fn record_fixture(
    request: &BackendRequest,
    response: &BackendResponse,
    store: &FixtureStore,
) -> Result<String, GatewayError> {
    store.put(request, response)
}

fn storage(e: impl std::fmt::Display) -> GatewayError {
    GatewayError::Storage(e.to_string())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), GatewayError> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(storage)?;
    file.write_all(bytes).map_err(storage)?;
    file.sync_all().map_err(storage)?;
    fs::rename(&tmp, path).map_err(storage)
}

fn redact_images(payload: &Value) -> Value {
    match payload {
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| match (k.as_str(), v) {
                    ("image_b64", Value::String(s)) => {
                        (k.clone(), Value::String(format!("sha256:{}", canonical::sha256_hex(s.as_bytes()))))
                    }
                    _ => (k.clone(), redact_images(v)),
                })
                .collect(),
        ),
        other => other.clone(),
    }
}

/// Serves responses from a [`FixtureStore`]; never touches the network.
pub struct ReplayBackend {
    store: std::sync::Arc<FixtureStore>,
    label: String,
}

impl ReplayBackend {
    pub fn new(store: std::sync::Arc<FixtureStore>, label: impl Into<String>) -> Self {
        ReplayBackend { store, label: label.into() }
    }
}

impl Backend for ReplayBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        self.store.get(request)
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn mode(&self) -> GatewayMode {
        GatewayMode::Replay
    }
}

/// Wraps another backend and records every successful response.
pub struct RecordingBackend {
    inner: SharedBackend,
    store: std::sync::Arc<FixtureStore>,
}

impl RecordingBackend {
    pub fn new(inner: SharedBackend, store: std::sync::Arc<FixtureStore>) -> Self {
        RecordingBackend { inner, store }
    }
}

impl Backend for RecordingBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, GatewayError> {
        let started = Instant::now();
        let mut response = self.inner.call(request)?;
        if response.latency_ms == 0 {
            response.latency_ms = started.elapsed().as_millis() as u64;
        }
        record_fixture(request, &response, &self.store)?;
        Ok(response)
    }

    fn label(&self) -> String {
        self.inner.label()
    }

    fn mode(&self) -> GatewayMode {
        self.inner.mode()
    }
}
