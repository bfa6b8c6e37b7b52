//! Walk one participant through a session: create, iterate a few prompts,
//! add a reflection, finalize with a coded survey, then show what was
//! persisted. Uses the bundled replay recordings, so it runs offline.
//!
//!     cargo run --example study_session -- /tmp/insightgen-store

use std::path::{Path, PathBuf};
use std::sync::Arc;

use insightgen::gateway::{GatewayConfig, GatewayMode};
use insightgen::insights::{render_report, Pipeline, PipelineConfig, ReportFormat};
use insightgen::study::{Condition, SessionStore, StudyHarness, StudyTexts, SurveyInput};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let store_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("insightgen-example-store"));

    let gateway = GatewayConfig { mode: GatewayMode::Replay, fixtures: Some(fixtures.join("replay")), ..Default::default() };
    let pipeline = Pipeline::from_config(&PipelineConfig::new(fixtures.join("materials_sample.json"), gateway))
        .expect("pipeline config");
    let store = Arc::new(SessionStore::open(&store_dir).expect("store opens"));
    let harness = StudyHarness::new(store, pipeline, StudyTexts::default());

    let session = harness.create_session("demo-participant", Condition::T3).expect("session");
    println!("session {} ({})", session.session_id, session.condition);
    if let Some(goal) = &session.goal_instruction {
        println!("goal: {goal}");
    }

    let prompts = [
        "A terrace lounge with hardwood decking and limestone feature walls",
        "A Scandinavian living room with oak floors and white plaster walls",
    ];
    for prompt in prompts {
        match harness.submit_iteration(&session.session_id, prompt) {
            Ok(it) => {
                println!("\niteration {}: {prompt}", it.index);
                print!("{}", render_report(&it.report, ReportFormat::TextTable));
            }
            Err(e) => println!("\n{prompt}: {e}"),
        }
    }

    harness
        .add_reflection(&session.session_id, 1, "Did not expect the decking to dominate.")
        .expect("reflection");
    let survey = SurveyInput {
        satisfaction: "Somewhat".into(),
        sustainability_considered: "Yes".into(),
        insights_useful: Some("Yes".into()),
        free_text: "Would swap the decking next time.".into(),
    };
    let done = harness
        .finalize_session(&session.session_id, survey.code().expect("labels code"))
        .expect("finalize");
    println!(
        "\nstatus {:?}, {} iterations, {} attempts left; stored under {}",
        done.status,
        done.iterations.len(),
        done.attempts_left(),
        store_dir.display()
    );
}
