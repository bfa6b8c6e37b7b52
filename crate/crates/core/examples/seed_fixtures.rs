//! Regenerate the bundled fixtures: replay recordings for the demo prompts
//! (from the deterministic mock backends) and the nine-participant study.
//!
//!     cargo run --example seed_fixtures

use std::path::Path;
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use insightgen::gateway::{Backends, GatewayConfig, GatewayMode};
use insightgen::insights::{Pipeline, PipelineSettings};
use insightgen::materials::load_dataset_file;
use insightgen::study::{code_reflection, export_sessions, Condition, IterationRecord, Session, StudyTexts, SurveyResponse};

// Final-survey labels per participant: (sustainability, satisfaction, insights useful).
const T1: [(&str, &str, &str); 9] = [
    ("No", "Yes", ""), ("No", "Yes", ""), ("No", "Yes", ""),
    ("No", "Yes", ""), ("No", "Yes", ""), ("No", "Yes", ""),
    ("No", "Somewhat", ""), ("No", "No", ""), ("No", "No", ""),
];
const T2: [(&str, &str, &str); 9] = [
    ("Yes", "Yes", ""), ("Yes", "Yes", ""), ("Yes", "Yes", ""),
    ("Yes", "Yes", ""), ("Yes", "Yes", ""), ("Yes", "Yes", ""),
    ("Yes", "No", ""), ("Somewhat", "Yes", ""), ("No", "No", ""),
];
const T3: [(&str, &str, &str); 9] = [
    ("Yes", "Yes", "Yes"), ("Yes", "Yes", "Yes"), ("Yes", "Yes", "Yes"),
    ("Yes", "Yes", "No"), ("Yes", "Somewhat", "Yes"), ("Yes", "No", "Yes"),
    ("Yes", "No", "Yes"), ("Yes", "No", "No"), ("Yes", "No", "No"),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let replay_dir = root.join("replay");
    let prompts: Vec<String> = std::fs::read_to_string(root.join("demo_prompts.txt"))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect();
    let dataset = Arc::new(load_dataset_file(&root.join("materials_sample.json"))?.dataset);

    let recording = GatewayConfig { mode: GatewayMode::Mock, fixtures: Some(replay_dir.clone()), ..Default::default() };
    let pipeline = Pipeline::new(dataset.clone(), Backends::from_config(&recording)?, PipelineSettings::default());
    for prompt in &prompts {
        let run = pipeline.run(prompt)?;
        println!("recorded {:<90} {} insights", prompt, run.report.insights.len());
    }

    let replay = GatewayConfig { mode: GatewayMode::Replay, fixtures: Some(replay_dir), ..Default::default() };
    let pipeline = Pipeline::new(dataset, Backends::from_config(&replay)?, PipelineSettings::default());
    let goal = StudyTexts::default().goal_instruction();
    let start = Utc.with_ymd_and_hms(2024, 5, 6, 9, 0, 0).unwrap();
    let mut sessions = Vec::new();
    for (c, (condition, answers)) in [(Condition::T1, T1), (Condition::T2, T2), (Condition::T3, T3)].into_iter().enumerate() {
        for (p, (sustain, satisfied, useful)) in answers.iter().enumerate() {
            let label = format!("p{:02}", p + 1);
            let at = start + Duration::days(p as i64) + Duration::hours(c as i64);
            let mut session = Session::new(format!("{label}-{condition}"), &label, condition, Some(goal.clone()), at)?;
            let prompt = &prompts[(p + c) % prompts.len()];
            let run = pipeline.run_with(prompt, condition.pipeline_condition())?;
            session.iterations.push(IterationRecord {
                index: 1,
                prompt: prompt.clone(),
                report: run.report,
                submitted_at: at + Duration::minutes(5),
                reflection: None,
            });
            session.finalize(SurveyResponse {
                satisfaction: code_reflection(satisfied)?,
                sustainability_considered: code_reflection(sustain)?,
                insights_useful: (!useful.is_empty()).then(|| code_reflection(useful)).transpose()?,
                free_text: String::new(),
            })?;
            sessions.push(session);
        }
    }
    let out = root.join("study_nine_participants.jsonl");
    export_sessions(&sessions, std::fs::File::create(&out)?)?;
    println!("wrote {} sessions to {}", sessions.len(), out.display());
    Ok(())
}
