//! Match free-text material descriptions to dataset records, first with the
//! lexical matcher alone and then with the vision-language re-ranker (mock
//! backend, so it runs offline).
//!
//!     cargo run --example match_materials
//!     cargo run --example match_materials -- "honed limestone cladding" "oak floor boards"

use std::path::Path;
use std::sync::Arc;

use insightgen::gateway::{MockVisionBackend, PromptTemplates};
use insightgen::materials::load_dataset_file;
use insightgen::matcher::{match_all, MatchOptions, MaterialDescription, VlmMatcher};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/materials_sample.json");
    let dataset = load_dataset_file(&path).expect("sample dataset loads").dataset;

    let mut texts: Vec<String> = std::env::args().skip(1).collect();
    if texts.is_empty() {
        texts = vec![
            "hardwood deck boards across the terrace".into(),
            "honed limestone cladding on the feature wall".into(),
            "Flooring, Engineered oak (per m2)".into(),
            "polished concrete floor slab".into(),
        ];
    }
    let descriptions: Vec<MaterialDescription> = texts
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, t)| MaterialDescription::new(t.clone(), i as u8 + 1))
        .collect();

    let vlm = VlmMatcher::new(Arc::new(MockVisionBackend), PromptTemplates::default());
    let options = MatchOptions::default();
    let lexical = match_all(&descriptions, &dataset, None, &options).expect("valid input");
    let reranked = match_all(&descriptions, &dataset, Some(&vlm), &options).expect("valid input");

    for (lex, vlm) in lexical.iter().zip(&reranked) {
        match (lex, vlm) {
            (Ok(l), Ok(v)) => {
                println!("{}", l.description.text);
                println!("  lexical  #{:<3} {:<45} score {:.3}", l.record_id, l.material_name, l.score);
                println!("  vlm      #{:<3} {:<45} ({:?})", v.record_id, v.material_name, v.method);
                for c in l.candidates.iter().take(3) {
                    println!("           candidate #{:<3} {:<36} {:.3}", c.record_id, c.material_name, c.score);
                }
            }
            (Err(e), _) | (_, Err(e)) => println!("  failed: {e}"),
        }
    }
}
