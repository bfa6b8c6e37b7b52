//! HTTP JSON API over the pipeline and the study harness.

mod error;
mod routes;

pub use error::{ApiError, ERROR_CODES};
pub use routes::{router, CreateSession, IterationBody, IterationResponse, ReflectionBody, SessionOverview};

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gateway::GatewayMode;
use crate::insights::{Pipeline, PipelineConfig};
use crate::study::{SessionStore, StudyHarness, StudyTexts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    pub store: PathBuf,
    /// Origins allowed to call the API from a browser. Empty means no CORS
    /// headers are sent.
    #[serde(default)]
    pub cors_allow: Vec<String>,
    #[serde(default = "default_max_body")]
    pub max_body_bytes: usize,
    #[serde(default)]
    pub texts: StudyTexts,
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_max_body() -> usize {
    64 * 1024
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("BindError: cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("ServeError: {0}")]
    Serve(std::io::Error),
}

impl ServiceConfig {
    pub fn new(pipeline: PipelineConfig, store: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            listen: default_listen(),
            pipeline,
            store: store.into(),
            cors_allow: Vec::new(),
            max_body_bytes: default_max_body(),
            texts: StudyTexts::default(),
        }
    }

    /// Read a JSON config; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<ServiceConfig, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: ServiceConfig =
            serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.pipeline.dataset = base.join(&config.pipeline.dataset);
        config.pipeline.gateway.fixtures = config.pipeline.gateway.fixtures.map(|f| base.join(f));
        config.store = base.join(&config.store);
        Ok(config)
    }
}

/// Shared handler state.
#[derive(Clone)]
pub struct AppState {
    pub harness: StudyHarness,
    pub records: usize,
    pub mode: GatewayMode,
}

impl AppState {
    /// Validate `config` and build everything the service needs. Missing
    /// or unusable paths fail here, naming the path.
    pub fn from_config(config: &ServiceConfig) -> Result<AppState, ServiceError> {
        let dataset = &config.pipeline.dataset;
        if !dataset.is_file() {
            return Err(ServiceError::Config(format!("dataset file {} does not exist", dataset.display())));
        }
        if let (GatewayMode::Replay, Some(dir)) = (config.pipeline.gateway.mode, &config.pipeline.gateway.fixtures) {
            if !dir.is_dir() {
                return Err(ServiceError::Config(format!("fixture directory {} does not exist", dir.display())));
            }
        }
        let pipeline = Pipeline::from_config(&config.pipeline).map_err(|e| ServiceError::Config(e.to_string()))?;
        let store = SessionStore::open(&config.store).map_err(|e| ServiceError::Config(e.to_string()))?;
        let probe = config.store.join(".write-probe");
        std::fs::write(&probe, b"ok")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| ServiceError::Config(format!("session store {} is not writable: {e}", config.store.display())))?;
        Ok(AppState {
            records: pipeline.dataset().len(),
            mode: pipeline.mode(),
            harness: StudyHarness::new(Arc::new(store), pipeline, config.texts.clone()),
        })
    }
}

/// Bind and serve until `shutdown` resolves. In-flight requests, including
/// running pipelines, finish before this returns.
pub async fn serve(config: ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
    let state = AppState::from_config(&config)?;
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServiceError::Bind { addr: config.listen, source })?;
    let addr = listener.local_addr().map_err(ServiceError::Serve)?;
    tracing::info!(%addr, records = state.records, mode = %state.mode, "listening");
    serve_on(listener, state, &config, shutdown).await
}

/// Serve on an already bound listener.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: AppState,
    config: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let app = router(state, &config.cors_allow, config.max_body_bytes);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await.map_err(ServiceError::Serve)
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down; draining in-flight requests");
}
