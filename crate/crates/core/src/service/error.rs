use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::study::StudyError;

/// Stable machine codes returned in [`ApiError::code`]. The set is closed:
/// every error response carries exactly one of these.
pub const ERROR_CODES: &[(&str, u16)] = &[
    ("bad_request", 400),
    ("consent_required", 400),
    ("uncodable_answer", 422),
    ("condition_mismatch", 422),
    ("not_found", 404),
    ("session_not_found", 404),
    ("iteration_not_found", 404),
    ("image_not_found", 404),
    ("attempt_limit_exceeded", 409),
    ("session_closed", 409),
    ("nothing_to_finalize", 409),
    ("incomplete_study", 409),
    ("payload_too_large", 413),
    ("pipeline_failed", 502),
    ("storage_error", 500),
    ("internal_error", 500),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub correlation_id: String,
}

impl ApiError {
    /// Build an error for `code`, which must be one of [`ERROR_CODES`].
    pub fn new(code: &str, message: impl Into<String>) -> ApiError {
        let status = ERROR_CODES
            .iter()
            .find(|(c, _)| *c == code)
            .map(|(_, s)| *s)
            .unwrap_or_else(|| panic!("unregistered error code {code}"));
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            correlation_id: uuid::Uuid::new_v4().to_string(),
        }
    }

    pub fn code_for(error: &StudyError) -> &'static str {
        match error {
            StudyError::Validation(_) => "bad_request",
            StudyError::NotFound(_) => "session_not_found",
            StudyError::IterationNotFound { .. } => "iteration_not_found",
            StudyError::AttemptLimitExceeded(_) => "attempt_limit_exceeded",
            StudyError::SessionClosed(_) => "session_closed",
            StudyError::UncodableAnswer(_) => "uncodable_answer",
            StudyError::NothingToFinalize(_) => "nothing_to_finalize",
            StudyError::ConditionMismatch(_) => "condition_mismatch",
            StudyError::IncompleteStudy(_) => "incomplete_study",
            StudyError::PipelineFailed(_) => "pipeline_failed",
            StudyError::Storage(_) => "storage_error",
        }
    }
}

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        ApiError::new(ApiError::code_for(&e), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(code = %self.code, correlation_id = %self.correlation_id, message = %self.message);
        } else {
            tracing::debug!(code = %self.code, correlation_id = %self.correlation_id, message = %self.message);
        }
        let id = HeaderValue::from_str(&self.correlation_id).ok();
        let mut response = (status, Json(self)).into_response();
        if let Some(id) = id {
            response.headers_mut().insert("x-correlation-id", id);
        }
        response
    }
}
