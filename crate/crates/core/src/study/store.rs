use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{FailedAttempt, IterationRecord, Session, StudyError, SurveyResponse};
use crate::canonical;
use crate::gateway::GeneratedImage;

/// One entry of a session's append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created { session: Session },
    IterationAdded { iteration: IterationRecord },
    IterationFailed { attempt: FailedAttempt },
    ReflectionAdded { index: u8, text: String },
    Finalized { survey: SurveyResponse },
}

impl SessionEvent {
    /// Apply this event to the state it was logged against.
    pub fn apply(&self, session: Option<Session>) -> Result<Session, StudyError> {
        let corrupt = || StudyError::Storage("event log does not start with a created event".into());
        match self {
            SessionEvent::Created { session } => Ok(session.clone()),
            SessionEvent::IterationAdded { iteration } => {
                let mut s = session.ok_or_else(corrupt)?;
                s.iterations.push(iteration.clone());
                Ok(s)
            }
            SessionEvent::IterationFailed { attempt } => {
                let mut s = session.ok_or_else(corrupt)?;
                s.failed_attempts.push(attempt.clone());
                Ok(s)
            }
            SessionEvent::ReflectionAdded { index, text } => {
                let mut s = session.ok_or_else(corrupt)?;
                let it = s
                    .iterations
                    .iter_mut()
                    .find(|it| it.index == *index)
                    .ok_or_else(|| StudyError::Storage(format!("reflection for missing iteration {index}")))?;
                it.reflection = Some(text.clone());
                Ok(s)
            }
            SessionEvent::Finalized { survey } => {
                let mut s = session.ok_or_else(corrupt)?;
                s.final_survey = Some(survey.clone());
                s.status = super::SessionStatus::Complete;
                Ok(s)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    at: DateTime<Utc>,
    #[serde(flatten)]
    event: SessionEvent,
}

/// Directory-backed session persistence.
///
/// Layout: `events/<id>.jsonl` (append-only log), `sessions/<id>.json`
/// (compacted snapshot, replaced atomically), `images/<hash>.<ext>`.
/// Mutations of one session are serialized by a per-session lock; different
/// sessions proceed independently.
pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl std::fmt::Debug for SessionStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionStore").field("root", &self.root).finish()
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    pub fn open(root: &Path) -> Result<SessionStore, StudyError> {
        for sub in ["events", "sessions", "images"] {
            fs::create_dir_all(root.join(sub))
                .map_err(|e| StudyError::Storage(format!("cannot create {}: {e}", root.join(sub).display())))?;
        }
        Ok(SessionStore { root: root.to_path_buf(), locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn snapshot_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.root.join("events").join(format!("{id}.jsonl"))
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().unwrap_or_else(|e| e.into_inner()).entry(id.to_string()).or_default().clone()
    }

    fn check_id(id: &str) -> Result<(), StudyError> {
        if valid_id(id) {
            Ok(())
        } else {
            Err(StudyError::NotFound(id.to_string()))
        }
    }

    /// Persist a new session. Fails if the id is taken.
    pub fn create(&self, session: &Session) -> Result<(), StudyError> {
        Self::check_id(&session.session_id)
            .map_err(|_| StudyError::Validation(format!("bad session id {:?}", session.session_id)))?;
        let lock = self.lock_for(&session.session_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if self.snapshot_path(&session.session_id).exists() {
            return Err(StudyError::Validation(format!("session {} already exists", session.session_id)));
        }
        self.append(&session.session_id, &SessionEvent::Created { session: session.clone() })?;
        self.write_snapshot(session)
    }

    pub fn load(&self, id: &str) -> Result<Session, StudyError> {
        Self::check_id(id)?;
        let path = self.snapshot_path(id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StudyError::NotFound(id.to_string())),
            Err(e) => return Err(StudyError::Storage(format!("{}: {e}", path.display()))),
        };
        serde_json::from_str(&text).map_err(|e| StudyError::Storage(format!("{}: {e}", path.display())))
    }

    /// Run `f` on the current state of session `id` while holding its lock.
    /// Events `f` returns are logged and the snapshot is replaced; an error
    /// leaves the store untouched.
    pub fn update<T>(
        &self,
        id: &str,
        f: impl FnOnce(&Session) -> Result<(Vec<SessionEvent>, T), StudyError>,
    ) -> Result<T, StudyError> {
        Self::check_id(id)?;
        let lock = self.lock_for(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let session = self.load(id)?;
        let (events, out) = f(&session)?;
        let mut next = session;
        for event in &events {
            next = event.apply(Some(next))?;
        }
        for event in &events {
            self.append(id, event)?;
        }
        if !events.is_empty() {
            self.write_snapshot(&next)?;
        }
        Ok(out)
    }

    /// Every stored session, sorted by id.
    pub fn sessions(&self) -> Result<Vec<Session>, StudyError> {
        let mut ids: Vec<String> = fs::read_dir(self.root.join("sessions"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_string))
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        ids.iter().map(|id| self.load(id)).collect()
    }

    /// Rebuild session `id` from its event log alone.
    pub fn replay_log(&self, id: &str) -> Result<Session, StudyError> {
        Self::check_id(id)?;
        let file = File::open(self.log_path(id)).map_err(|_| StudyError::NotFound(id.to_string()))?;
        let mut state = None;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogLine = serde_json::from_str(&line)
                .map_err(|e| StudyError::Storage(format!("event log {id} line {}: {e}", n + 1)))?;
            state = Some(entry.event.apply(state)?);
        }
        state.ok_or_else(|| StudyError::Storage(format!("event log {id} is empty")))
    }

    /// Store image bytes under their content hash.
    pub fn put_image(&self, image: &GeneratedImage) -> Result<PathBuf, StudyError> {
        let path = self.image_path(&image.image_id, image.media_type.extension());
        if !path.exists() {
            write_atomic(&path, &image.bytes)?;
        }
        Ok(path)
    }

    fn image_path(&self, hash: &str, ext: &str) -> PathBuf {
        self.root.join("images").join(format!("{hash}.{ext}"))
    }

    /// Look up stored image bytes by content hash.
    pub fn get_image(&self, hash: &str) -> Option<(Vec<u8>, &'static str)> {
        if hash.len() != 64 || !hash.chars().all(|c| c.is_ascii_hexdigit()) {
            return None;
        }
        for (ext, mime) in [("png", "image/png"), ("jpg", "image/jpeg")] {
            if let Ok(bytes) = fs::read(self.image_path(hash, ext)) {
                return Some((bytes, mime));
            }
        }
        None
    }

    fn append(&self, id: &str, event: &SessionEvent) -> Result<(), StudyError> {
        let line = canonical::to_canonical_string(&LogLine { at: Utc::now(), event: event.clone() })
            .map_err(|e| StudyError::Storage(e.to_string()))?;
        let mut file = OpenOptions::new().create(true).append(true).open(self.log_path(id))?;
        file.write_all(format!("{line}\n").as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    fn write_snapshot(&self, session: &Session) -> Result<(), StudyError> {
        let text = canonical::to_canonical_pretty(session).map_err(|e| StudyError::Storage(e.to_string()))?;
        write_atomic(&self.snapshot_path(&session.session_id), text.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StudyError> {
    let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
    let result = (|| {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(StudyError::Storage(format!("{}: {e}", path.display())));
    }
    Ok(())
}
