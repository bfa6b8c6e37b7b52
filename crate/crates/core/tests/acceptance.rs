//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fail.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use insightgen::gateway::GatewayMode;
use insightgen::insights::{
    contains_carbon_markers, render_report, MatcherKind, Pipeline, PipelineCondition, PipelineSettings, ReportFormat,
};
use insightgen::materials::{
    embodied_carbon, normalize_per_kg, MaterialDataset, MaterialRecord, NormalizationError, StageSet,
};
use insightgen::matcher::{lexical_match, MaterialDescription};
use insightgen::study::{
    code_reflection, read_sessions_file, summarize_study, Condition, SessionStore, StudyHarness, StudyTexts,
    MAX_ITERATIONS,
};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use common::{
    carbon_value_strings, fixtures, mock_pipeline, oracle, random_dataset, random_description, record,
    record_scenario, replay_backends, sample_dataset, VOCAB,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn within(started: Instant, limit: Duration) -> Outcome {
    let took = started.elapsed();
    if took > limit {
        return Err(format!("took {took:?}, limit {limit:?}"));
    }
    Ok(format!("{took:.2?}"))
}

fn carbon_arithmetic() -> Outcome {
    let started = Instant::now();
    let dataset = sample_dataset();
    let decking = dataset.get(9).ok_or("record 9 missing")?;
    ensure!(decking.material_name == "Decking, Hardwood (per m3)", "record 9 is {}", decking.material_name);

    // independent sum of the literal field values
    let manual = 226.8 + 47.6 + 1772.84;
    let headline = embodied_carbon(decking, StageSet::HEADLINE).value;
    ensure!(close(headline, 2047.24, 1e-9), "headline {headline}");
    ensure!(close(headline, manual, 1e-9), "headline {headline} vs manual {manual}");

    let net = embodied_carbon(decking, StageSet::HEADLINE | StageSet::BIOGENIC).value;
    ensure!(close(net, 1284.44, 1e-9), "headline + biogenic {net}");
    ensure!(close(net, manual + -762.8, 1e-9), "net {net} vs manual");
    ensure!(close(embodied_carbon(decking, StageSet::BIOGENIC).value, -762.8, 1e-9), "biogenic");

    let per_kg = normalize_per_kg(decking, &embodied_carbon(decking, StageSet::HEADLINE)).map_err(|e| e.to_string())?;
    ensure!(close(per_kg.value, 3.5885, 1e-4), "per kg {}", per_kg.value);
    ensure!(close(per_kg.value, manual / 570.5, 1e-6), "per kg {} vs manual {}", per_kg.value, manual / 570.5);
    let took = within(started, Duration::from_secs(1))?;
    Ok(format!("2047.24 / 1284.44 / {:.4} per kg in {took}", per_kg.value))
}

fn matcher_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for _ in 0..100 {
        let dataset = random_dataset(&mut rng, 100);
        for _ in 0..20 {
            let text = random_description(&mut rng, &dataset);
            let want = oracle::best(&text, &dataset);
            let got = lexical_match(&MaterialDescription::new(text.clone(), 1), &dataset, 10)
                .map_err(|e| format!("{text:?}: {e}"))?;
            ensure!(
                (got.record_id, got.score) == want,
                "{text:?}: matcher chose {} ({}), oracle {} ({})",
                got.record_id,
                got.score,
                want.0,
                want.1
            );
            checked += 1;
        }
    }
    let took = within(started, Duration::from_secs(30))?;
    Ok(format!("{checked}/{checked} agree in {took}"))
}

fn random_prompt(rng: &mut StdRng) -> String {
    let n = rng.random_range(3..=9);
    let words: Vec<&str> = (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect();
    format!("An interior with {}", words.join(" "))
}

fn replay_determinism() -> Outcome {
    let mut rng = StdRng::seed_from_u64(42);
    let scenarios = 24;
    for i in 0..scenarios {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dataset = Arc::new(random_dataset(&mut rng, 60));
        let prompts: Vec<String> = (0..rng.random_range(1..=3)).map(|_| random_prompt(&mut rng)).collect();
        let settings = PipelineSettings {
            matcher: if rng.random_bool(0.5) { MatcherKind::Vlm } else { MatcherKind::Lexical },
            condition: if rng.random_bool(0.8) { PipelineCondition::T2iInsights } else { PipelineCondition::T2iOnly },
            ..Default::default()
        };
        record_scenario(dir.path(), dataset.clone(), &prompts, &settings);
        let mock = Pipeline::new(dataset.clone(), common::mock_backends(), settings.clone());
        for prompt in &prompts {
            let render = || -> Result<String, String> {
                let pipeline = Pipeline::new(dataset.clone(), replay_backends(dir.path()), settings.clone());
                let report = pipeline.run(prompt).map_err(|e| format!("scenario {i}: {e}"))?.report;
                ensure!(report.pipeline_trace.mode == GatewayMode::Replay, "scenario {i}: not replayed");
                Ok(render_report(&report, ReportFormat::Json))
            };
            let (a, b) = (render()?, render()?);
            ensure!(a == b, "scenario {i}: replayed output differs for {prompt:?}");
            let live = mock.run(prompt).map_err(|e| e.to_string())?.report;
            let replayed: insightgen::insights::InsightReport = serde_json::from_str(&a).map_err(|e| e.to_string())?;
            ensure!(live.insights == replayed.insights, "scenario {i}: replay differs from recording");
        }
    }
    Ok(format!("{scenarios} scenarios byte-identical"))
}

fn condition_gating() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let harness = StudyHarness::new(
        Arc::new(SessionStore::open(dir.path()).map_err(|e| e.to_string())?),
        mock_pipeline(),
        StudyTexts::default(),
    );
    let needles = carbon_value_strings(&sample_dataset());
    let prompt = "A terrace lounge with hardwood decking and limestone feature walls";
    for condition in [Condition::T1, Condition::T2] {
        let s = harness.create_session("gate", condition).map_err(|e| e.to_string())?;
        let it = harness.submit_iteration(&s.session_id, prompt).map_err(|e| e.to_string())?;
        ensure!(it.report.pipeline_trace.vlm_calls == 0, "{condition}: {} vlm calls", it.report.pipeline_trace.vlm_calls);
        let mut outputs = vec![
            render_report(&it.report, ReportFormat::Json),
            render_report(&it.report, ReportFormat::TextTable),
        ];
        for sub in ["sessions", "events"] {
            let ext = if sub == "sessions" { "json" } else { "jsonl" };
            let path = dir.path().join(sub).join(format!("{}.{ext}", s.session_id));
            outputs.push(std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?);
        }
        for text in &outputs {
            ensure!(!contains_carbon_markers(text), "{condition}: carbon marker in output");
            if let Some(n) = needles.iter().find(|n| text.contains(n.as_str())) {
                return Err(format!("{condition}: carbon value {n} in output"));
            }
        }
    }
    let s = harness.create_session("gate", Condition::T3).map_err(|e| e.to_string())?;
    let it = harness.submit_iteration(&s.session_id, prompt).map_err(|e| e.to_string())?;
    let resolved = it.report.resolved().count();
    ensure!(it.report.insights.len() == 10, "T3 has {} entries", it.report.insights.len());
    ensure!(resolved == 10, "T3 resolved {resolved} of 10");
    Ok("T1/T2 clean with 0 vlm calls; T3 10 entries".into())
}

fn attempt_cap() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let harness = StudyHarness::new(
        Arc::new(SessionStore::open(dir.path()).map_err(|e| e.to_string())?),
        mock_pipeline(),
        StudyTexts::default(),
    );
    let s = harness.create_session("cap", Condition::T3).map_err(|e| e.to_string())?;
    for i in 0..MAX_ITERATIONS {
        harness.submit_iteration(&s.session_id, &format!("variant {i}")).map_err(|e| e.to_string())?;
    }
    let sixth = harness.submit_iteration(&s.session_id, "variant 6");
    match sixth {
        Err(e) if e.kind() == "AttemptLimitExceeded" => {}
        other => return Err(format!("sixth attempt gave {:?}", other.map(|it| it.index))),
    }
    let reopened = SessionStore::open(dir.path()).map_err(|e| e.to_string())?;
    let n = reopened.load(&s.session_id).map_err(|e| e.to_string())?.iterations.len();
    ensure!(n == MAX_ITERATIONS, "store holds {n} iterations");
    Ok("6th attempt refused; 5 iterations persisted".into())
}

fn study_summary_reproduction() -> Outcome {
    let started = Instant::now();
    let sessions = read_sessions_file(&fixtures().join("study_nine_participants.jsonl")).map_err(|e| e.to_string())?;
    let summary = summarize_study(&sessions).map_err(|e| e.to_string())?;
    let expected = [
        (Condition::T1, 0.0, 72.2, None),
        (Condition::T2, 83.3, 77.8, None),
        (Condition::T3, 100.0, 50.0, Some(66.7)),
    ];
    let mut line = Vec::new();
    for (condition, sus, sat, useful) in expected {
        let s = summary.conditions.get(&condition).ok_or(format!("{condition} missing"))?;
        ensure!(s.n_participants == 9, "{condition}: {} participants", s.n_participants);
        ensure!(close(s.sustainability_considered_pct, sus, 0.1), "{condition} sustainability {}", s.sustainability_considered_pct);
        ensure!(close(s.satisfaction_pct, sat, 0.1), "{condition} satisfaction {}", s.satisfaction_pct);
        match (s.insights_useful_pct, useful) {
            (Some(got), Some(want)) => ensure!(close(got, want, 0.1), "{condition} usefulness {got}"),
            (None, None) => {}
            (got, want) => return Err(format!("{condition} usefulness {got:?}, expected {want:?}")),
        }
        line.push(format!("{condition} {}/{}", s.sustainability_considered_pct, s.satisfaction_pct));
    }
    let took = within(started, Duration::from_secs(1))?;
    Ok(format!("{} in {took}", line.join(", ")))
}

fn unit_normalization() -> Outcome {
    // (record, expected per-kg value or None when the unit cannot convert)
    let rows: Vec<(MaterialRecord, Option<f64>)> = vec![
        (record(1, "Steel rebar (per kg)", "Rebar", "Steel", "Metal", "kg", (1.2, 0.1, 0.05), 0.0, None), Some(1.35)),
        (record(2, "Copper pipe (per kg)", "Pipe", "Copper", "Metal", "kg", (2.6, 0.0, 0.4), 0.0, Some(8940.0)), Some(3.0)),
        (record(3, "Brick (per kg)", "Brick", "Clay", "Masonry", "kg", (0.2, 0.01, 0.02), 0.0, None), Some(0.23)),
        (record(4, "Decking (per m3)", "Decking", "Hardwood", "Wood", "m3", (226.8, 47.6, 1772.84), -762.8, Some(570.5)), Some(2047.24 / 570.5)),
        (record(5, "Concrete (per m3)", "Slab", "Concrete", "Concrete", "m3", (300.0, 10.0, 20.0), 0.0, Some(2400.0)), Some(0.1375)),
        (record(6, "CLT (per m3)", "Panel", "Spruce", "Wood", "m3", (120.0, 5.0, 400.0), -650.0, Some(500.0)), Some(1.05)),
        (record(7, "Rammed earth (per m3)", "Wall", "Earth", "Earth", "m3", (40.0, 2.0, 3.0), 0.0, None), None),
        (record(8, "Foam (per m3)", "Insulation", "PIR", "Plastic", "m3", (90.0, 1.0, 9.0), 0.0, None), None),
        (record(9, "Vinyl sheet (per m2)", "Flooring", "PVC", "Plastic", "m2", (12.0, 0.5, 1.5), 0.0, None), None),
        (record(10, "Plasterboard (per m2)", "Board", "Gypsum", "Mineral", "m2", (2.1, 0.1, 0.3), 0.0, Some(700.0)), None),
        (record(11, "Door (per piece)", "Door", "Softwood", "Wood", "piece", (35.0, 1.0, 4.0), -20.0, None), None),
        (record(12, "Window (per piece)", "Window", "Aluminium", "Metal", "piece", (210.0, 3.0, 7.0), 0.0, Some(2700.0)), None),
    ];
    let records: Vec<MaterialRecord> = rows.iter().map(|(r, _)| r.clone()).collect();
    let dataset = MaterialDataset::from_records(records, "units").map_err(|e| e.to_string())?;
    ensure!(dataset.dataset.len() == 12 && dataset.rejected.is_empty(), "fixture did not load cleanly");
    for (r, expected) in &rows {
        let raw = embodied_carbon(r, StageSet::HEADLINE);
        match (normalize_per_kg(r, &raw), expected) {
            (Ok(q), Some(want)) => {
                ensure!(close(q.value, *want, 1e-9), "{}: per kg {} expected {want}", r.material_name, q.value)
            }
            (Err(NormalizationError::Unsupported { .. }), None) => {}
            (got, want) => return Err(format!("{}: got {got:?}, expected {want:?}", r.material_name)),
        }
    }
    Ok("12 records: kg identity, m3 with density divided, others unsupported".into())
}

fn coding_scale() -> Outcome {
    for (label, score) in [("Yes", 1.0), ("Somewhat", 0.5), ("No", 0.0)] {
        let coded = code_reflection(label).map_err(|e| e.to_string())?;
        ensure!(coded.score == score, "{label} scored {}", coded.score);
    }
    let mut rng = StdRng::seed_from_u64(8);
    let alphabet: Vec<char> = "yesnomwhatYESNOSW .!?-0123456789".chars().collect();
    let mut fuzzed = Vec::new();
    while fuzzed.len() < 20 {
        let len = rng.random_range(0..12);
        let s: String = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        if !["yes", "somewhat", "no"].contains(&s.trim().to_lowercase().as_str()) {
            fuzzed.push(s);
        }
    }
    fuzzed.extend(["Yes.", "y", "Somewhat yes", "Nope"].map(String::from));
    for s in &fuzzed {
        match code_reflection(s) {
            Err(e) if e.kind() == "UncodableAnswer" => {}
            other => return Err(format!("{s:?} coded as {other:?}")),
        }
    }
    Ok(format!("3 labels coded; {} non-labels rejected", fuzzed.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("carbon arithmetic", carbon_arithmetic),
        ("matcher agrees with brute-force oracle", matcher_oracle),
        ("replay determinism", replay_determinism),
        ("condition gating", condition_gating),
        ("attempt cap", attempt_cap),
        ("study summary reproduction", study_summary_reproduction),
        ("unit normalization", unit_normalization),
        ("coding scale", coding_scale),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let took = started.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({took:.2?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({took:.2?}): {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
