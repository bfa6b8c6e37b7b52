mod common;

use std::sync::Arc;

use insightgen::gateway::{BackendKind, GatewayError, PromptTemplates, ScriptedBackend};
use insightgen::materials::MaterialDataset;
use insightgen::matcher::{
    lexical_match, match_all, vlm_match, MatchMethod, MatchOptions, MaterialDescription, VlmMatcher,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde_json::json;

use common::{oracle, random_dataset, random_description, record, sample_dataset};

fn three_records() -> MaterialDataset {
    MaterialDataset::from_records(
        vec![
            record(9, "Decking, Hardwood (per m3)", "Decking", "Hardwood", "Wood", "m3", (226.8, 47.6, 1772.84), -762.8, Some(570.5)),
            record(21, "Cladding, Limestone (per kg)", "Cladding", "Limestone", "Stone", "kg", (0.09, 0.004, 0.012), 0.0, None),
            record(30, "Flooring, Wood fiber board (per m2)", "Flooring", "Wood fiber board", "Wood", "m2", (5.6, 0.4, 9.1), -11.3, None),
        ],
        "three",
    )
    .unwrap()
    .dataset
}

#[test]
fn hardwood_deck_description_matches_decking() {
    let ds = three_records();
    let r = lexical_match(&MaterialDescription::new("hardwood deck boards across the terrace", 1), &ds, 10).unwrap();
    assert_eq!(r.record_id, 9);
    assert_eq!(r.method, MatchMethod::Lexical);
    // query {hardwood, deck, board, acros, the, terrace}; record 9 {decking, hardwood, wood}
    assert!((r.score - 1.0 / 8.0).abs() < 1e-12);
    let c30 = r.candidates.iter().find(|c| c.record_id == 30).unwrap();
    assert!((c30.score - 1.0 / 9.0).abs() < 1e-12);
    let c21 = r.candidates.iter().find(|c| c.record_id == 21).unwrap();
    assert_eq!(c21.score, 0.0);
}

#[test]
fn exact_name_wins_with_score_one() {
    let ds = three_records();
    let r = lexical_match(&MaterialDescription::new("cladding,  LIMESTONE (per kg) ", 1), &ds, 10).unwrap();
    assert_eq!((r.record_id, r.score, r.method), (21, 1.0, MatchMethod::Exact));
}

#[test]
fn input_errors() {
    let ds = three_records();
    let blank = lexical_match(&MaterialDescription::new("   ", 1), &ds, 10).unwrap_err();
    assert_eq!(blank.kind(), "EmptyDescription");
    assert!(MaterialDataset::from_records(vec![], "empty").is_err());
    let e = lexical_match(&MaterialDescription::new("oak", 1), &ds, 0).unwrap_err();
    assert_eq!(e.kind(), "InvalidShortlist");
}

#[test]
fn candidates_are_sorted_and_bounded() {
    let ds = sample_dataset();
    let r = lexical_match(&MaterialDescription::new("oak flooring planks", 1), &ds, 5).unwrap();
    assert_eq!(r.candidates.len(), 5);
    for w in r.candidates.windows(2) {
        assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].record_id < w[1].record_id));
    }
    assert!(r.candidates.iter().all(|c| r.score >= c.score));
}

fn vlm(backend: Arc<ScriptedBackend>) -> VlmMatcher {
    VlmMatcher::new(backend, PromptTemplates::default())
}

#[test]
fn vlm_picks_shortlisted_record() {
    let ds = three_records();
    let backend = Arc::new(ScriptedBackend::new("s"));
    backend.push(BackendKind::VlmMatch, Ok(json!({ "text": "Flooring, Wood fiber board (per m2)" })));
    let r = vlm_match(&MaterialDescription::new("hardwood deck boards", 1), &ds, &vlm(backend.clone())).unwrap();
    assert_eq!((r.record_id, r.method, r.score, r.vlm_calls), (30, MatchMethod::Vlm, 1.0, 1));
    let req = &backend.requests()[0];
    assert_eq!(req.payload["shortlist"].as_array().unwrap().len(), 3);
}

#[test]
fn vlm_invalid_answer_retries_then_falls_back() {
    let ds = three_records();
    let backend = Arc::new(ScriptedBackend::new("s"));
    backend.push(BackendKind::VlmMatch, Ok(json!({ "text": "Teak decking" })));
    backend.push(BackendKind::VlmMatch, Ok(json!({ "text": "Still not a name" })));
    let r = vlm_match(&MaterialDescription::new("hardwood deck boards", 1), &ds, &vlm(backend.clone())).unwrap();
    assert_eq!((r.record_id, r.method, r.vlm_calls), (9, MatchMethod::VlmFallbackLexical, 2));
    let second = &backend.requests()[1];
    assert!(second.payload.to_string().contains("Teak decking"));
}

#[test]
fn vlm_correction_round_recovers() {
    let ds = three_records();
    let backend = Arc::new(ScriptedBackend::new("s"));
    backend.push(BackendKind::VlmMatch, Ok(json!({ "text": "Teak decking" })));
    backend.push(BackendKind::VlmMatch, Ok(json!({ "text": "Answer: \"Cladding, Limestone (per kg)\"" })));
    let r = vlm_match(&MaterialDescription::new("hardwood deck boards", 1), &ds, &vlm(backend)).unwrap();
    assert_eq!((r.record_id, r.method, r.vlm_calls), (21, MatchMethod::Vlm, 2));
}

#[test]
fn vlm_transport_failures() {
    let ds = three_records();
    let desc = MaterialDescription::new("hardwood deck boards", 1);

    let backend = Arc::new(ScriptedBackend::new("s"));
    backend.push(BackendKind::VlmMatch, Err(GatewayError::unavailable("down")));
    backend.push(BackendKind::VlmMatch, Err(GatewayError::unavailable("still down")));
    assert_eq!(vlm_match(&desc, &ds, &vlm(backend)).unwrap_err().kind(), "BackendUnavailable");

    let backend = Arc::new(ScriptedBackend::new("s"));
    backend.push(BackendKind::VlmMatch, Err(GatewayError::unavailable("blip")));
    backend.push(BackendKind::VlmMatch, Ok(json!({ "text": "Decking, Hardwood (per m3)" })));
    let r = vlm_match(&desc, &ds, &vlm(backend)).unwrap();
    assert_eq!((r.record_id, r.method), (9, MatchMethod::Vlm));
}

#[test]
fn vlm_skips_backend_on_exact_name() {
    let ds = three_records();
    let backend = Arc::new(ScriptedBackend::new("s"));
    let r = vlm_match(&MaterialDescription::new("Decking, Hardwood (per m3)", 1), &ds, &vlm(backend.clone())).unwrap();
    assert_eq!(r.method, MatchMethod::Exact);
    assert!(backend.requests().is_empty());
}

#[test]
fn match_all_orders_by_rank_and_flags_repeats() {
    let ds = three_records();
    let descs = vec![
        MaterialDescription::new("limestone wall", 3),
        MaterialDescription::new("hardwood decking", 1),
        MaterialDescription::new("hardwood deck", 2),
    ];
    let out = match_all(&descs, &ds, None, &MatchOptions::default()).unwrap();
    let got: Vec<_> = out.iter().map(|r| r.as_ref().unwrap()).map(|r| (r.description.source_rank, r.record_id, r.duplicate)).collect();
    assert_eq!(got, vec![(1, 9, false), (2, 9, true), (3, 21, false)]);

    assert_eq!(match_all(&[], &ds, None, &MatchOptions::default()).unwrap_err().kind(), "EmptyInput");
    let dup = vec![MaterialDescription::new("a", 1), MaterialDescription::new("b", 1)];
    assert_eq!(match_all(&dup, &ds, None, &MatchOptions::default()).unwrap_err().kind(), "DuplicateRank");
    let many: Vec<_> = (1..=11).map(|i| MaterialDescription::new("oak", i)).collect();
    assert_eq!(match_all(&many, &ds, None, &MatchOptions::default()).unwrap_err().kind(), "TooManyDescriptions");
}

#[test]
fn match_all_keeps_per_item_failures_in_place() {
    let ds = three_records();
    let backend = Arc::new(ScriptedBackend::new("s").with_fallback(|_| Err(GatewayError::unavailable("down"))));
    let descs = vec![
        MaterialDescription::new("Cladding, Limestone (per kg)", 1),
        MaterialDescription::new("hardwood deck", 2),
    ];
    let out = match_all(&descs, &ds, Some(&vlm(backend)), &MatchOptions::default()).unwrap();
    assert_eq!(out[0].as_ref().unwrap().record_id, 21);
    assert_eq!(out[1].as_ref().unwrap_err().kind(), "BackendUnavailable");
}

#[test]
fn concurrent_vlm_fan_out_matches_sequential() {
    let ds = sample_dataset();
    let descs: Vec<_> = insightgen::gateway::MOCK_MATERIAL_POOL
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, d)| MaterialDescription::new(*d, i as u8 + 1))
        .collect();
    let backend = Arc::new(
        ScriptedBackend::new("s")
            .with_fallback(|req| Ok(json!({ "text": req.payload["shortlist"][0] })))
            .with_delay(std::time::Duration::from_millis(5)),
    );
    let seq = match_all(&descs, &ds, Some(&vlm(backend.clone())), &MatchOptions { k: 10, workers: 1 }).unwrap();
    let par = match_all(&descs, &ds, Some(&vlm(backend)), &MatchOptions { k: 10, workers: 4 }).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn agrees_with_brute_force_oracle() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..30 {
        let ds = random_dataset(&mut rng, 40);
        for _ in 0..20 {
            let text = random_description(&mut rng, &ds);
            let (id, score) = oracle::best(&text, &ds);
            let got = lexical_match(&MaterialDescription::new(text.clone(), 1), &ds, 10).unwrap();
            assert_eq!((got.record_id, got.score), (id, score), "description {text:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn result_is_independent_of_record_order(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 30);
        let mut shuffled = ds.records().to_vec();
        shuffled.shuffle(&mut rng);
        let ds2 = MaterialDataset::from_records(shuffled, "shuffled").unwrap().dataset;
        let text = random_description(&mut rng, &ds);
        let a = lexical_match(&MaterialDescription::new(text.clone(), 1), &ds, 10).unwrap();
        let b = lexical_match(&MaterialDescription::new(text, 1), &ds2, 10).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn chosen_score_dominates_candidates(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 30);
        let text = random_description(&mut rng, &ds);
        let r = lexical_match(&MaterialDescription::new(text, 1), &ds, 10).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.score));
        prop_assert!(r.candidates.iter().all(|c| r.score >= c.score));
        prop_assert!(ds.get(r.record_id).is_some());
    }
}
