use std::io::{BufRead, Write};
use std::path::Path;

use super::{Session, StudyError};
use crate::canonical;

/// Write one canonical JSON object per session, one per line.
pub fn export_sessions<W: Write>(sessions: &[Session], mut sink: W) -> Result<(), StudyError> {
    for session in sessions {
        let line = canonical::to_canonical_string(session).map_err(|e| StudyError::Storage(e.to_string()))?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Read sessions written by [`export_sessions`]. Blank lines are skipped.
pub fn import_sessions<R: BufRead>(source: R) -> Result<Vec<Session>, StudyError> {
    let mut sessions = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let session: Session = serde_json::from_str(&line)
            .map_err(|e| StudyError::Validation(format!("line {}: {e}", n + 1)))?;
        let problems = session.violations();
        if !problems.is_empty() {
            return Err(StudyError::Validation(format!(
                "line {} (session {}): {}",
                n + 1,
                session.session_id,
                problems.join("; ")
            )));
        }
        sessions.push(session);
    }
    Ok(sessions)
}

pub fn read_sessions_file(path: &Path) -> Result<Vec<Session>, StudyError> {
    let file = std::fs::File::open(path).map_err(|e| StudyError::Storage(format!("{}: {e}", path.display())))?;
    import_sessions(std::io::BufReader::new(file))
}
