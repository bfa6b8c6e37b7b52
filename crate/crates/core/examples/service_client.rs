//! Start the HTTP API on a random local port (replay mode, temporary store)
//! and drive one session through it the way the browser front end does.
//!
//!     cargo run --example service_client

use std::path::Path;

use insightgen::gateway::{GatewayConfig, GatewayMode};
use insightgen::insights::PipelineConfig;
use insightgen::service::{serve_on, AppState, ServiceConfig};
use serde_json::{json, Value};

#[tokio::main]
async fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let store = std::env::temp_dir().join(format!("insightgen-service-{}", std::process::id()));
    let gateway = GatewayConfig { mode: GatewayMode::Replay, fixtures: Some(fixtures.join("replay")), ..Default::default() };
    let config = ServiceConfig::new(PipelineConfig::new(fixtures.join("materials_sample.json"), gateway), &store);
    let state = AppState::from_config(&config).expect("service config");

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        serve_on(listener, state, &config, async {
            let _ = stopped.await;
        })
        .await
    });

    let http = reqwest::Client::new();
    let call = |method: reqwest::Method, path: String, body: Option<Value>| {
        let mut req = http.request(method, format!("{base}{path}"));
        if let Some(body) = body {
            req = req.json(&body);
        }
        async move {
            let resp = req.send().await.expect("request");
            let status = resp.status();
            let body: Value = resp.json().await.unwrap_or(Value::Null);
            println!("{status} {path}");
            body
        }
    };

    let health = call(reqwest::Method::GET, "/healthz".into(), None).await;
    println!("  {health}");

    let session = call(
        reqwest::Method::POST,
        "/sessions".into(),
        Some(json!({ "participant_label": "demo", "condition": "T3", "consent": true })),
    )
    .await;
    let id = session["session_id"].as_str().expect("session id").to_string();

    let it = call(
        reqwest::Method::POST,
        format!("/sessions/{id}/iterations"),
        Some(json!({ "prompt": "A terrace lounge with hardwood decking and limestone feature walls" })),
    )
    .await;
    println!("  image {} , {} attempts left", it["image_url"], it["attempts_left"]);
    for entry in it["iteration"]["report"]["insights"].as_array().into_iter().flatten().take(3) {
        println!("  {} -> {} kg CO2e", entry["description"]["text"], entry["raw_carbon"]["value"]);
    }

    let bad = call(reqwest::Method::POST, format!("/sessions/{id}/iterations"), Some(json!({ "prompt": "never recorded" }))).await;
    println!("  {} : {}", bad["code"], bad["message"]);

    call(
        reqwest::Method::POST,
        format!("/sessions/{id}/finalize"),
        Some(json!({ "satisfaction": "Yes", "sustainability_considered": "Yes", "insights_useful": "Somewhat" })),
    )
    .await;
    let summary = call(reqwest::Method::GET, "/study/summary".into(), None).await;
    println!("  {summary}");

    let _ = stop.send(());
    server.await.expect("server task").expect("clean shutdown");
    let _ = std::fs::remove_dir_all(&store);
}
