use axum::extract::{DefaultBodyLimit, FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use super::{ApiError, AppState};
use crate::study::{
    summarize_study, Condition, IterationRecord, Session, SessionStatus, StudyError, StudySummary, SurveyInput,
    SurveyResponse, MAX_ITERATIONS,
};

/// `Json` with rejections mapped onto [`ApiError`].
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(ApiJson(value)),
            Err(rejection) if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE => {
                Err(ApiError::new("payload_too_large", "request body is too large"))
            }
            Err(rejection) => Err(ApiError::new("bad_request", rejection.body_text())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub participant_label: String,
    pub condition: Condition,
    pub consent: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationBody {
    pub prompt: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionBody {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResponse {
    pub iteration: IterationRecord,
    pub attempts_left: usize,
    pub image_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOverview {
    #[serde(flatten)]
    pub session: Session,
    pub attempts_left: usize,
    pub max_iterations: usize,
}

impl From<Session> for SessionOverview {
    fn from(mut session: Session) -> Self {
        for it in &mut session.iterations {
            it.report = it.report.user_facing();
        }
        SessionOverview { attempts_left: session.attempts_left(), max_iterations: MAX_ITERATIONS, session }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
struct StudyQuery {
    #[serde(default)]
    complete_only: bool,
}

fn image_url(hash: &str) -> String {
    format!("/images/{hash}")
}

/// Run blocking harness work off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StudyError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new("internal_error", format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "records": state.records, "mode": state.mode }))
}

async fn create_session(
    State(state): State<AppState>,
    ApiJson(body): ApiJson<CreateSession>,
) -> Result<(StatusCode, Json<SessionOverview>), ApiError> {
    if !body.consent {
        return Err(ApiError::new("consent_required", "participant consent is required to start a session"));
    }
    let harness = state.harness.clone();
    let session = blocking(move || harness.create_session(&body.participant_label, body.condition)).await?;
    Ok((StatusCode::CREATED, Json(session.into())))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionOverview>, ApiError> {
    let harness = state.harness.clone();
    let session = blocking(move || harness.session(&id)).await?;
    Ok(Json(session.into()))
}

async fn submit_iteration(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<IterationBody>,
) -> Result<(StatusCode, Json<IterationResponse>), ApiError> {
    let harness = state.harness.clone();
    let (mut iteration, attempts_left) = blocking(move || {
        let iteration = harness.submit_iteration(&id, &body.prompt)?;
        let left = harness.session(&id)?.attempts_left();
        Ok((iteration, left))
    })
    .await?;
    iteration.report = iteration.report.user_facing();
    let url = image_url(&iteration.report.image.image_id);
    Ok((StatusCode::CREATED, Json(IterationResponse { iteration, attempts_left, image_url: url })))
}

async fn add_reflection(
    State(state): State<AppState>,
    Path((id, n)): Path<(String, String)>,
    ApiJson(body): ApiJson<ReflectionBody>,
) -> Result<Json<SessionOverview>, ApiError> {
    let index: u8 = n
        .parse()
        .map_err(|_| ApiError::new("iteration_not_found", format!("iteration {n:?} is not a number")))?;
    let harness = state.harness.clone();
    let session = blocking(move || harness.add_reflection(&id, index, &body.text)).await?;
    Ok(Json(session.into()))
}

async fn finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<SurveyInput>,
) -> Result<Json<SessionOverview>, ApiError> {
    let survey: SurveyResponse = body.code()?;
    let harness = state.harness.clone();
    let session = blocking(move || harness.finalize_session(&id, survey)).await?;
    Ok(Json(session.into()))
}

async fn session_summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let harness = state.harness.clone();
    let session = blocking(move || harness.session(&id)).await?;
    let iterations: Vec<_> = session
        .iterations
        .iter()
        .map(|it| {
            json!({
                "index": it.index,
                "prompt": it.prompt,
                "image_url": image_url(&it.report.image.image_id),
                "reflection": it.reflection,
                "insight_count": it.report.user_facing().insights.len(),
            })
        })
        .collect();
    Ok(Json(json!({
        "session_id": session.session_id,
        "participant_label": session.participant_label,
        "condition": session.condition,
        "status": session.status,
        "iterations": iterations,
        "failed_attempts": session.failed_attempts.len(),
        "final_survey": session.final_survey,
    })))
}

async fn study_summary(
    State(state): State<AppState>,
    Query(query): Query<StudyQuery>,
) -> Result<Json<StudySummary>, ApiError> {
    let harness = state.harness.clone();
    let summary = blocking(move || {
        let mut sessions = harness.sessions()?;
        if query.complete_only {
            sessions.retain(|s| s.status == SessionStatus::Complete);
        }
        summarize_study(&sessions)
    })
    .await?;
    Ok(Json(summary))
}

async fn image(State(state): State<AppState>, Path(hash): Path<String>) -> Result<Response, ApiError> {
    let store = state.harness.store().clone();
    let key = hash.clone();
    let found = tokio::task::spawn_blocking(move || store.get_image(&key))
        .await
        .map_err(|e| ApiError::new("internal_error", format!("worker failed: {e}")))?;
    let (bytes, mime) = found.ok_or_else(|| ApiError::new("image_not_found", format!("no image {hash}")))?;
    Ok((
        [
            (header::CONTENT_TYPE, mime.to_string()),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable".to_string()),
            (header::ETAG, format!("\"{hash}\"")),
        ],
        bytes,
    )
        .into_response())
}

async fn fallback() -> ApiError {
    ApiError::new("not_found", "no such endpoint")
}

/// The API router.
pub fn router(state: AppState, cors_allow: &[String], max_body_bytes: usize) -> Router {
    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/iterations", post(submit_iteration))
        .route("/sessions/{id}/iterations/{n}/reflection", post(add_reflection))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/summary", get(session_summary))
        .route("/study/summary", get(study_summary))
        .route("/images/{hash}", get(image))
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state);
    let origins: Vec<HeaderValue> = cors_allow.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    if !origins.is_empty() {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app
}
