//! Three-condition design study: sessions of up to five prompt iterations,
//! per-iteration reflections, a coded final survey, and aggregation.

mod export;
mod harness;
mod store;
mod summary;

pub use export::{export_sessions, import_sessions, read_sessions_file};
pub use harness::{add_reflection, create_session, finalize_session, submit_iteration, StudyHarness, StudyTexts};
pub use store::{SessionEvent, SessionStore};
pub use summary::{render_summary_table, summarize_study, ConditionSummary, ScoreTotals, StudySummary};

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::insights::{InsightReport, PipelineCondition};

pub const MAX_ITERATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// No sustainability framing.
    T1,
    /// Sustainability as a stated goal.
    T2,
    /// Goal plus material CO₂e insights.
    T3,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::T1, Condition::T2, Condition::T3];

    pub fn pipeline_condition(self) -> PipelineCondition {
        match self {
            Condition::T1 | Condition::T2 => PipelineCondition::T2iOnly,
            Condition::T3 => PipelineCondition::T2iInsights,
        }
    }

    pub fn shows_goal(self) -> bool {
        self != Condition::T1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::T1 => "T1",
            Condition::T2 => "T2",
            Condition::T3 => "T3",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" => Ok(Condition::T1),
            "T2" => Ok(Condition::T2),
            "T3" => Ok(Condition::T3),
            _ => Err(StudyError::Validation(format!("unknown condition {s:?} (expected T1, T2 or T3)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerLabel {
    Yes,
    Somewhat,
    No,
}

impl AnswerLabel {
    pub fn score(self) -> f64 {
        match self {
            AnswerLabel::Yes => 1.0,
            AnswerLabel::Somewhat => 0.5,
            AnswerLabel::No => 0.0,
        }
    }
}

/// A survey answer on the three-point scale. The score is always derived
/// from the label; a stored score that disagrees is rejected on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodedAnswerRepr")]
pub struct CodedAnswer {
    pub label: AnswerLabel,
    pub score: f64,
}

#[derive(Deserialize)]
struct CodedAnswerRepr {
    label: AnswerLabel,
    score: Option<f64>,
}

impl TryFrom<CodedAnswerRepr> for CodedAnswer {
    type Error = String;

    fn try_from(repr: CodedAnswerRepr) -> Result<Self, Self::Error> {
        let answer = CodedAnswer::from(repr.label);
        match repr.score {
            Some(score) if score != answer.score => {
                Err(format!("score {score} does not match label {:?}", repr.label))
            }
            _ => Ok(answer),
        }
    }
}

impl From<AnswerLabel> for CodedAnswer {
    fn from(label: AnswerLabel) -> Self {
        CodedAnswer { label, score: label.score() }
    }
}

/// Map a coder's label to the scale. Matching is exact apart from case and
/// surrounding whitespace; nothing is inferred from free text.
pub fn code_reflection(label_text: &str) -> Result<CodedAnswer, StudyError> {
    let label = match label_text.trim().to_lowercase().as_str() {
        "yes" => AnswerLabel::Yes,
        "somewhat" => AnswerLabel::Somewhat,
        "no" => AnswerLabel::No,
        _ => return Err(StudyError::UncodableAnswer(label_text.to_string())),
    };
    Ok(label.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub satisfaction: CodedAnswer,
    pub sustainability_considered: CodedAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insights_useful: Option<CodedAnswer>,
    #[serde(default)]
    pub free_text: String,
}

/// Survey as entered by the coder, before labels are coded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyInput {
    pub satisfaction: String,
    pub sustainability_considered: String,
    #[serde(default)]
    pub insights_useful: Option<String>,
    #[serde(default)]
    pub free_text: String,
}

impl SurveyInput {
    pub fn code(&self) -> Result<SurveyResponse, StudyError> {
        Ok(SurveyResponse {
            satisfaction: code_reflection(&self.satisfaction)?,
            sustainability_considered: code_reflection(&self.sustainability_considered)?,
            insights_useful: self.insights_useful.as_deref().map(code_reflection).transpose()?,
            free_text: self.free_text.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based, contiguous.
    pub index: u8,
    pub prompt: String,
    pub report: InsightReport,
    pub submitted_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<String>,
}

/// A submission whose pipeline run failed. Kept for the record; it does not
/// use up one of the five attempts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedAttempt {
    pub prompt: String,
    pub stage: String,
    pub error_kind: String,
    pub message: String,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub participant_label: String,
    pub condition: Condition,
    /// Shown to the participant in T2 and T3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_instruction: Option<String>,
    pub iterations: Vec<IterationRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_attempts: Vec<FailedAttempt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_survey: Option<SurveyResponse>,
    pub status: SessionStatus,
    pub created_at: DateTime<Utc>,
}

impl Session {
    /// A new open session. Fails on a blank participant label.
    pub fn new(
        session_id: impl Into<String>,
        participant_label: &str,
        condition: Condition,
        goal_instruction: Option<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Session, StudyError> {
        if participant_label.trim().is_empty() {
            return Err(StudyError::Validation("participant_label must not be blank".into()));
        }
        Ok(Session {
            session_id: session_id.into(),
            participant_label: participant_label.trim().to_string(),
            condition,
            goal_instruction: if condition.shows_goal() { goal_instruction } else { None },
            iterations: Vec::new(),
            failed_attempts: Vec::new(),
            final_survey: None,
            status: SessionStatus::Open,
            created_at,
        })
    }

    pub fn attempts_left(&self) -> usize {
        MAX_ITERATIONS.saturating_sub(self.iterations.len())
    }

    /// Check the session can take another iteration.
    pub fn check_can_iterate(&self) -> Result<(), StudyError> {
        if self.status == SessionStatus::Complete {
            return Err(StudyError::SessionClosed(self.session_id.clone()));
        }
        if self.iterations.len() >= MAX_ITERATIONS {
            return Err(StudyError::AttemptLimitExceeded(self.session_id.clone()));
        }
        Ok(())
    }

    /// Validate `survey` against the condition and close the session.
    pub fn finalize(&mut self, survey: SurveyResponse) -> Result<(), StudyError> {
        if self.status == SessionStatus::Complete {
            return Err(StudyError::SessionClosed(self.session_id.clone()));
        }
        if self.iterations.is_empty() {
            return Err(StudyError::NothingToFinalize(self.session_id.clone()));
        }
        match (self.condition, survey.insights_useful.is_some()) {
            (Condition::T3, false) => {
                return Err(StudyError::ConditionMismatch("insights_useful is required for T3".into()))
            }
            (Condition::T1 | Condition::T2, true) => {
                return Err(StudyError::ConditionMismatch(format!(
                    "insights_useful is only asked in T3, not {}",
                    self.condition
                )))
            }
            _ => {}
        }
        self.final_survey = Some(survey);
        self.status = SessionStatus::Complete;
        Ok(())
    }

    /// Check the structural invariants of a loaded session.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.iterations.len() > MAX_ITERATIONS {
            out.push(format!("{} iterations (max {MAX_ITERATIONS})", self.iterations.len()));
        }
        for (i, it) in self.iterations.iter().enumerate() {
            if it.index as usize != i + 1 {
                out.push(format!("iteration at position {} has index {}", i + 1, it.index));
            }
            let shown = it.report.condition_visibility == crate::insights::Visibility::MetricsShown;
            if shown != (self.condition == Condition::T3) {
                out.push(format!("iteration {} visibility does not match condition {}", it.index, self.condition));
            }
        }
        if self.final_survey.is_some() != (self.status == SessionStatus::Complete) {
            out.push("final_survey present iff status is complete".into());
        }
        if let Some(survey) = &self.final_survey {
            if survey.insights_useful.is_some() != (self.condition == Condition::T3) {
                out.push("insights_useful present iff condition is T3".into());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StudyError {
    #[error("ValidationError: {0}")]
    Validation(String),
    #[error("SessionNotFound: {0}")]
    NotFound(String),
    #[error("IterationNotFound: session {session_id} has no iteration {index}")]
    IterationNotFound { session_id: String, index: u8 },
    #[error("AttemptLimitExceeded: session {0} already has {MAX_ITERATIONS} iterations")]
    AttemptLimitExceeded(String),
    #[error("SessionClosed: session {0} is complete")]
    SessionClosed(String),
    #[error("UncodableAnswer: {0:?} is not one of Yes, Somewhat, No")]
    UncodableAnswer(String),
    #[error("NothingToFinalize: session {0} has no iterations")]
    NothingToFinalize(String),
    #[error("ConditionMismatch: {0}")]
    ConditionMismatch(String),
    #[error("IncompleteStudy: session {0} is still open")]
    IncompleteStudy(String),
    #[error("PipelineFailed: {0}")]
    PipelineFailed(String),
    #[error("StorageError: {0}")]
    Storage(String),
}

impl StudyError {
    pub fn kind(&self) -> &'static str {
        match self {
            StudyError::Validation(_) => "ValidationError",
            StudyError::NotFound(_) => "SessionNotFound",
            StudyError::IterationNotFound { .. } => "IterationNotFound",
            StudyError::AttemptLimitExceeded(_) => "AttemptLimitExceeded",
            StudyError::SessionClosed(_) => "SessionClosed",
            StudyError::UncodableAnswer(_) => "UncodableAnswer",
            StudyError::NothingToFinalize(_) => "NothingToFinalize",
            StudyError::ConditionMismatch(_) => "ConditionMismatch",
            StudyError::IncompleteStudy(_) => "IncompleteStudy",
            StudyError::PipelineFailed(_) => "PipelineFailed",
            StudyError::Storage(_) => "StorageError",
        }
    }
}

impl From<std::io::Error> for StudyError {
    fn from(e: std::io::Error) -> Self {
        StudyError::Storage(e.to_string())
    }
}
