use std::sync::Arc;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use super::{
    Condition, FailedAttempt, IterationRecord, Session, SessionEvent, SessionStatus, SessionStore, StudyError,
    SurveyResponse,
};
use crate::insights::Pipeline;

/// Participant-facing text, versioned so sessions record which wording
/// they saw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyTexts {
    pub version: String,
    pub sustainability_goal: String,
}

impl Default for StudyTexts {
    fn default() -> Self {
        StudyTexts {
            version: "goal-v1".into(),
            sustainability_goal: "Design goal: make this interior as sustainable as you can. Favour materials \
                                  with low embodied carbon while keeping the design you want."
                .into(),
        }
    }
}

impl StudyTexts {
    pub fn goal_instruction(&self) -> String {
        format!("{} [{}]", self.sustainability_goal, self.version)
    }
}

pub fn create_session(
    store: &SessionStore,
    participant_label: &str,
    condition: Condition,
    texts: &StudyTexts,
) -> Result<Session, StudyError> {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id, participant_label, condition, Some(texts.goal_instruction()), Utc::now())?;
    store.create(&session)?;
    Ok(session)
}

/// Run one design iteration. The session stays locked for the whole
/// pipeline run, so concurrent submissions cannot exceed the cap. A
/// pipeline failure is logged as a failed attempt and returned as
/// `PipelineFailed`; it does not use up an attempt.
pub fn submit_iteration(
    store: &SessionStore,
    pipeline: &Pipeline,
    id: &str,
    prompt: &str,
) -> Result<IterationRecord, StudyError> {
    if prompt.trim().is_empty() {
        return Err(StudyError::Validation("prompt must not be blank".into()));
    }
    store.update(id, |session| {
        session.check_can_iterate()?;
        match pipeline.run_with(prompt, session.condition.pipeline_condition()) {
            Ok(run) => {
                store.put_image(&run.image)?;
                let iteration = IterationRecord {
                    index: session.iterations.len() as u8 + 1,
                    prompt: prompt.to_string(),
                    report: run.report,
                    submitted_at: Utc::now(),
                    reflection: None,
                };
                Ok((vec![SessionEvent::IterationAdded { iteration: iteration.clone() }], Ok(iteration)))
            }
            Err(e) => {
                let attempt = FailedAttempt {
                    prompt: prompt.to_string(),
                    stage: e.stage().to_string(),
                    error_kind: e.kind().to_string(),
                    message: e.to_string(),
                    submitted_at: Utc::now(),
                };
                Ok((vec![SessionEvent::IterationFailed { attempt }], Err(StudyError::PipelineFailed(e.to_string()))))
            }
        }
    })?
}

/// Attach the participant's free-text reflection to iteration `index`.
pub fn add_reflection(store: &SessionStore, id: &str, index: u8, text: &str) -> Result<Session, StudyError> {
    store.update(id, |session| {
        if session.status == SessionStatus::Complete {
            return Err(StudyError::SessionClosed(id.to_string()));
        }
        if !session.iterations.iter().any(|it| it.index == index) {
            return Err(StudyError::IterationNotFound { session_id: id.to_string(), index });
        }
        let event = SessionEvent::ReflectionAdded { index, text: text.to_string() };
        let next = event.apply(Some(session.clone()))?;
        Ok((vec![event], next))
    })
}

pub fn finalize_session(store: &SessionStore, id: &str, survey: SurveyResponse) -> Result<Session, StudyError> {
    store.update(id, |session| {
        let mut next = session.clone();
        next.finalize(survey.clone())?;
        Ok((vec![SessionEvent::Finalized { survey }], next))
    })
}

/// A session store bound to a pipeline and study wording.
#[derive(Clone)]
pub struct StudyHarness {
    store: Arc<SessionStore>,
    pipeline: Pipeline,
    texts: StudyTexts,
}

impl StudyHarness {
    pub fn new(store: Arc<SessionStore>, pipeline: Pipeline, texts: StudyTexts) -> Self {
        StudyHarness { store, pipeline, texts }
    }

    pub fn store(&self) -> &Arc<SessionStore> {
        &self.store
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn create_session(&self, participant_label: &str, condition: Condition) -> Result<Session, StudyError> {
        create_session(&self.store, participant_label, condition, &self.texts)
    }

    pub fn session(&self, id: &str) -> Result<Session, StudyError> {
        self.store.load(id)
    }

    pub fn submit_iteration(&self, id: &str, prompt: &str) -> Result<IterationRecord, StudyError> {
        submit_iteration(&self.store, &self.pipeline, id, prompt)
    }

    pub fn add_reflection(&self, id: &str, index: u8, text: &str) -> Result<Session, StudyError> {
        add_reflection(&self.store, id, index, text)
    }

    pub fn finalize_session(&self, id: &str, survey: SurveyResponse) -> Result<Session, StudyError> {
        finalize_session(&self.store, id, survey)
    }

    pub fn sessions(&self) -> Result<Vec<Session>, StudyError> {
        self.store.sessions()
    }
}
