//! Embodied carbon for dataset records: the headline A1-A3 + A5 + C1-C4
//! figure, biogenic carbon on its own line, and a per-kg value where the
//! functional unit allows it.
//!
//!     cargo run --example carbon_metrics
//!     cargo run --example carbon_metrics -- 9 21 30

use std::path::Path;

use insightgen::materials::{
    embodied_carbon, load_dataset_file, normalization_note, normalize_per_kg, StageSet,
};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/materials_sample.json");
    let load = load_dataset_file(&path).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(3);
    });
    let dataset = load.dataset;

    let ids: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids = if ids.is_empty() { vec![9, 21, 30] } else { ids };

    for id in ids {
        let Some(record) = dataset.get(id) else {
            eprintln!("no record with id {id}");
            continue;
        };
        let headline = embodied_carbon(record, StageSet::HEADLINE);
        let biogenic = embodied_carbon(record, StageSet::BIOGENIC);
        let per_kg = normalize_per_kg(record, &headline);

        println!("{} (id {})", record.material_name, record.id);
        println!("  A1-A3 + A5 + C1-C4  {:>12.2} {}", headline.value, headline.unit_label);
        println!("  biogenic            {:>12.2} {}", biogenic.value, biogenic.unit_label);
        match &per_kg {
            Ok(q) => println!("  per kg              {:>12.4} {}", q.value, q.unit_label),
            Err(_) => println!("  per kg              {:>12}", "n/a"),
        }
        println!("  note: {}", normalization_note(record, &per_kg));
        println!();
    }
}
