//! Aggregate coded surveys into per-condition percentages. Reads the
//! bundled nine-participant export by default, or any store directory or
//! JSONL export given on the command line.
//!
//!     cargo run --example study_summary
//!     cargo run --example study_summary -- path/to/sessions.jsonl

use std::path::{Path, PathBuf};

use insightgen::study::{read_sessions_file, render_summary_table, summarize_study, SessionStore};

fn main() {
    let source = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/study_nine_participants.jsonl")
    });
    let sessions = if source.is_dir() {
        SessionStore::open(&source).and_then(|s| s.sessions())
    } else {
        read_sessions_file(&source)
    }
    .unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(3);
    });

    match summarize_study(&sessions) {
        Ok(summary) => print!("{}", render_summary_table(&summary)),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(10);
        }
    }
}
