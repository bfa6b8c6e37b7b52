mod common;

use std::sync::Arc;
use std::time::Duration;

use insightgen::gateway::{
    ApiKey, Backend, Backends, GatewayConfig, GatewayMode, LiveConfig, LiveImageBackend, MockImageBackend,
    MockVisionBackend, ScriptedBackend,
};
use insightgen::insights::{contains_carbon_markers, Pipeline, PipelineConfig, PipelineSettings};
use insightgen::service::{serve_on, ApiError, AppState, ServiceConfig, ServiceError, ERROR_CODES};
use insightgen::study::{SessionStore, StudyError, StudyHarness, StudyTexts};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use common::{fixtures, sample_dataset, sample_dataset_path};

const TERRACE: &str = "A terrace lounge with hardwood decking and limestone feature walls";

fn replay_config(store: &std::path::Path) -> ServiceConfig {
    let gateway = GatewayConfig { mode: GatewayMode::Replay, fixtures: Some(fixtures().join("replay")), ..Default::default() };
    ServiceConfig::new(PipelineConfig::new(sample_dataset_path(), gateway), store)
}

struct Server {
    base: String,
    client: Client,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<Result<(), ServiceError>>,
}

impl Server {
    async fn start(state: AppState, config: ServiceConfig) -> Server {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            serve_on(listener, state, &config, async {
                let _ = rx.await;
            })
            .await
        });
        Server { base, client: Client::new(), stop: Some(tx), task }
    }

    async fn replay(store: &std::path::Path) -> Server {
        let config = replay_config(store);
        Server::start(AppState::from_config(&config).unwrap(), config).await
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn stop(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.task.await.unwrap().unwrap();
    }
}

fn assert_error(status: StatusCode, body: &Value, code: &str) {
    assert_eq!(body["code"], code, "{body}");
    let registered = ERROR_CODES.iter().find(|(c, _)| *c == code).expect("registered code");
    assert_eq!(status.as_u16(), registered.1, "{body}");
    assert!(body["correlation_id"].as_str().is_some_and(|s| !s.is_empty()));
    assert!(body["message"].is_string());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_reports_dataset_and_mode() {
    let store = tempfile::tempdir().unwrap();
    let server = Server::replay(store.path()).await;
    let (status, body) = server.get("/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "status": "ok", "records": 30, "mode": "replay" }));
    server.stop().await;
}

#[test]
fn startup_names_the_missing_path() {
    let store = tempfile::tempdir().unwrap();
    let mut config = replay_config(store.path());
    config.pipeline.dataset = store.path().join("nowhere.json");
    let err = AppState::from_config(&config).err().unwrap();
    assert!(err.to_string().contains("nowhere.json"), "{err}");

    let mut config = replay_config(store.path());
    config.pipeline.gateway.fixtures = Some(store.path().join("no-fixtures"));
    let err = AppState::from_config(&config).err().unwrap();
    assert!(err.to_string().contains("no-fixtures"), "{err}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn full_session_flow_over_http() {
    let store = tempfile::tempdir().unwrap();
    let server = Server::replay(store.path()).await;

    let (status, created) = server
        .post("/sessions", json!({ "participant_label": "p01", "condition": "T3", "consent": true }))
        .await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(created["attempts_left"], 5);
    assert_eq!(created["max_iterations"], 5);
    assert!(created["goal_instruction"].is_string());

    let (status, it) = server.post(&format!("/sessions/{id}/iterations"), json!({ "prompt": TERRACE })).await;
    assert_eq!(status, StatusCode::CREATED, "{it}");
    assert_eq!(it["attempts_left"], 4);
    assert_eq!(it["iteration"]["index"], 1);
    assert_eq!(it["iteration"]["report"]["insights"].as_array().unwrap().len(), 10);
    let image_url = it["image_url"].as_str().unwrap().to_string();

    let r = server.client.get(format!("{}{image_url}", server.base)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()["content-type"], "image/png");
    assert_eq!(r.headers()["cache-control"], "public, max-age=31536000, immutable");
    let hash = image_url.rsplit('/').next().unwrap();
    assert_eq!(r.headers()["etag"], format!("\"{hash}\""));
    let bytes = r.bytes().await.unwrap();
    assert_eq!(insightgen::canonical::sha256_hex(&bytes), hash);

    let (status, s) = server
        .post(&format!("/sessions/{id}/iterations/1/reflection"), json!({ "text": "decking is heavy" }))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["iterations"][0]["reflection"], "decking is heavy");

    let (status, s) = server
        .post(
            &format!("/sessions/{id}/finalize"),
            json!({ "satisfaction": "Yes", "sustainability_considered": "Somewhat", "insights_useful": "yes" }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{s}");
    assert_eq!(s["status"], "complete");

    let (status, summary) = server.get(&format!("/sessions/{id}/summary")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["iterations"][0]["image_url"], image_url);
    assert_eq!(summary["iterations"][0]["insight_count"], 10);

    let (status, study) = server.get("/study/summary").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(study["conditions"]["T3"]["satisfaction_pct"], 100.0);
    assert_eq!(study["conditions"]["T3"]["sustainability_considered_pct"], 50.0);

    let (_, fetched) = server.get(&format!("/sessions/{id}")).await;
    assert_eq!(fetched["session_id"], id.as_str());
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn image_only_sessions_leak_nothing_over_http() {
    let store = tempfile::tempdir().unwrap();
    let server = Server::replay(store.path()).await;
    for condition in ["T1", "T2"] {
        let (_, created) = server
            .post("/sessions", json!({ "participant_label": "p", "condition": condition, "consent": true }))
            .await;
        let id = created["session_id"].as_str().unwrap();
        let r = server
            .client
            .post(format!("{}/sessions/{id}/iterations", server.base))
            .json(&json!({ "prompt": TERRACE }))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        let text = r.text().await.unwrap();
        assert!(!contains_carbon_markers(&text), "{text}");
        let text = server.client.get(format!("{}/sessions/{id}", server.base)).send().await.unwrap().text().await.unwrap();
        assert!(!contains_carbon_markers(&text), "{text}");
    }
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn every_error_uses_a_registered_code() {
    let store = tempfile::tempdir().unwrap();
    let mut config = replay_config(store.path());
    config.max_body_bytes = 1024;
    let server = Server::start(AppState::from_config(&config).unwrap(), config).await;

    let r = server
        .client
        .post(format!("{}/sessions", server.base))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    let status = r.status();
    assert_error(status, &r.json().await.unwrap(), "bad_request");

    let (s, b) = server.post("/sessions", json!({ "participant_label": "p", "condition": "T4", "consent": true })).await;
    assert_error(s, &b, "bad_request");
    let (s, b) = server.post("/sessions", json!({ "participant_label": "p", "condition": "T3", "consent": false })).await;
    assert_error(s, &b, "consent_required");
    let (s, b) = server.post("/sessions", json!({ "participant_label": " ", "condition": "T3", "consent": true })).await;
    assert_error(s, &b, "bad_request");
    let (s, b) = server.post("/sessions", json!({ "participant_label": "x".repeat(4096), "condition": "T3", "consent": true })).await;
    assert_error(s, &b, "payload_too_large");

    let (s, b) = server.get("/nope").await;
    assert_error(s, &b, "not_found");
    let (s, b) = server.get("/sessions/missing").await;
    assert_error(s, &b, "session_not_found");
    let (s, b) = server.get(&format!("/images/{}", "0".repeat(64))).await;
    assert_error(s, &b, "image_not_found");

    let (_, created) = server.post("/sessions", json!({ "participant_label": "p", "condition": "T3", "consent": true })).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let survey = json!({ "satisfaction": "Yes", "sustainability_considered": "Yes", "insights_useful": "Yes" });

    let (s, b) = server.post(&format!("/sessions/{id}/finalize"), survey.clone()).await;
    assert_error(s, &b, "nothing_to_finalize");
    let (s, b) = server.get("/study/summary").await;
    assert_error(s, &b, "incomplete_study");
    let (s, _) = server.get("/study/summary?complete_only=true").await;
    assert_eq!(s, StatusCode::OK);

    let (s, b) = server.post(&format!("/sessions/{id}/iterations"), json!({ "prompt": "not recorded" })).await;
    assert_error(s, &b, "pipeline_failed");
    assert!(b["message"].as_str().unwrap().contains("ReplayMiss"));
    let (s, b) = server.post(&format!("/sessions/{id}/iterations/1/reflection"), json!({ "text": "x" })).await;
    assert_error(s, &b, "iteration_not_found");

    for _ in 0..5 {
        let (s, b) = server.post(&format!("/sessions/{id}/iterations"), json!({ "prompt": TERRACE })).await;
        assert_eq!(s, StatusCode::CREATED, "{b}");
    }
    let (s, b) = server.post(&format!("/sessions/{id}/iterations"), json!({ "prompt": TERRACE })).await;
    assert_error(s, &b, "attempt_limit_exceeded");

    let (s, b) = server
        .post(&format!("/sessions/{id}/finalize"), json!({ "satisfaction": "Kind of", "sustainability_considered": "Yes", "insights_useful": "Yes" }))
        .await;
    assert_error(s, &b, "uncodable_answer");
    let (s, b) = server
        .post(&format!("/sessions/{id}/finalize"), json!({ "satisfaction": "Yes", "sustainability_considered": "Yes" }))
        .await;
    assert_error(s, &b, "condition_mismatch");
    let (s, _) = server.post(&format!("/sessions/{id}/finalize"), survey.clone()).await;
    assert_eq!(s, StatusCode::OK);
    let (s, b) = server.post(&format!("/sessions/{id}/finalize"), survey).await;
    assert_error(s, &b, "session_closed");
    server.stop().await;

    for (code, status) in ERROR_CODES {
        assert_eq!(ApiError::new(code, "m").status, *status);
    }
    assert_eq!(ApiError::from(StudyError::Storage("disk".into())).code, "storage_error");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn cors_headers_only_for_allowed_origins() {
    let store = tempfile::tempdir().unwrap();
    let mut config = replay_config(store.path());
    config.cors_allow = vec!["http://localhost:5173".into()];
    let server = Server::start(AppState::from_config(&config).unwrap(), config).await;
    let r = server
        .client
        .get(format!("{}/healthz", server.base))
        .header("origin", "http://localhost:5173")
        .send()
        .await
        .unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], "http://localhost:5173");
    let r = server.client.get(format!("{}/healthz", server.base)).header("origin", "http://evil.test").send().await.unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn shutdown_waits_for_running_pipeline() {
    let store_dir = tempfile::tempdir().unwrap();
    let slow_t2i = ScriptedBackend::new("slow")
        .with_delay(Duration::from_millis(400))
        .with_fallback(|req| MockImageBackend.call(req).map(|r| r.payload));
    let pipeline = Pipeline::new(
        sample_dataset(),
        Backends { t2i: Arc::new(slow_t2i), vlm: Arc::new(MockVisionBackend) },
        PipelineSettings::default(),
    );
    let store = Arc::new(SessionStore::open(store_dir.path()).unwrap());
    let state = AppState {
        harness: StudyHarness::new(store.clone(), pipeline, StudyTexts::default()),
        records: 30,
        mode: GatewayMode::Mock,
    };
    let config = ServiceConfig::new(PipelineConfig::new(sample_dataset_path(), GatewayConfig::default()), store_dir.path());
    let server = Server::start(state, config).await;
    let (_, created) = server.post("/sessions", json!({ "participant_label": "p", "condition": "T3", "consent": true })).await;
    let id = created["session_id"].as_str().unwrap().to_string();

    let client = server.client.clone();
    let url = format!("{}/sessions/{id}/iterations", server.base);
    let in_flight = tokio::spawn(async move { client.post(url).json(&json!({ "prompt": TERRACE })).send().await });
    tokio::time::sleep(Duration::from_millis(100)).await;
    server.stop().await;

    let response = in_flight.await.unwrap().unwrap();
    assert_eq!(response.status(), StatusCode::CREATED);
    let snapshot = store.load(&id).unwrap();
    assert_eq!(snapshot.iterations.len(), 1);
    assert_eq!(store.replay_log(&id).unwrap(), snapshot);
}

#[test]
fn live_credentials_never_surface() {
    const SECRET: &str = "sk-test-7f3a9c1d-do-not-print";
    let config = LiveConfig {
        t2i_endpoint: "http://127.0.0.1:9/v1/images/generations".into(),
        timeout_secs: 2,
        ..Default::default()
    };
    let t2i = LiveImageBackend::new(&config, ApiKey::new(SECRET)).unwrap();
    assert!(!format!("{:?}", ApiKey::new(SECRET)).contains(SECRET));
    let pipeline = Pipeline::new(
        sample_dataset(),
        Backends { t2i: Arc::new(t2i), vlm: Arc::new(MockVisionBackend) },
        PipelineSettings::default(),
    );
    let dir = tempfile::tempdir().unwrap();
    let harness = StudyHarness::new(Arc::new(SessionStore::open(dir.path()).unwrap()), pipeline, StudyTexts::default());
    let s = harness.create_session("p", insightgen::study::Condition::T3).unwrap();
    let err = harness.submit_iteration(&s.session_id, TERRACE).unwrap_err();
    assert_eq!(err.kind(), "PipelineFailed");
    let api = serde_json::to_string(&ApiError::from(err.clone())).unwrap();

    let mut seen = vec![err.to_string(), format!("{err:?}"), api, format!("{:?}", harness.pipeline())];
    for sub in ["events", "sessions"] {
        for entry in std::fs::read_dir(dir.path().join(sub)).unwrap() {
            seen.push(std::fs::read_to_string(entry.unwrap().path()).unwrap());
        }
    }
    let mut export = Vec::new();
    insightgen::study::export_sessions(&harness.sessions().unwrap(), &mut export).unwrap();
    seen.push(String::from_utf8(export).unwrap());
    for text in seen {
        assert!(!text.contains(SECRET), "secret leaked: {text}");
        assert!(!text.contains("Bearer"), "auth header leaked: {text}");
    }
}
