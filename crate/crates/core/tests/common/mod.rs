#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use insightgen::gateway::{Backends, GatewayConfig, GatewayMode};
use insightgen::insights::{Pipeline, PipelineSettings};
use insightgen::materials::{load_dataset_file, MaterialDataset, MaterialRecord};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::json;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn sample_dataset_path() -> PathBuf {
    fixtures().join("materials_sample.json")
}

pub fn sample_dataset() -> Arc<MaterialDataset> {
    Arc::new(load_dataset_file(&sample_dataset_path()).unwrap().dataset)
}

pub fn demo_prompts() -> Vec<String> {
    std::fs::read_to_string(fixtures().join("demo_prompts.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

pub fn replay_backends(dir: &Path) -> Backends {
    Backends::from_config(&GatewayConfig {
        mode: GatewayMode::Replay,
        fixtures: Some(dir.to_path_buf()),
        ..Default::default()
    })
    .unwrap()
}

pub fn mock_backends() -> Backends {
    Backends::from_config(&GatewayConfig::default()).unwrap()
}

/// Pipeline over the sample dataset replaying the bundled recordings.
pub fn bundled_replay_pipeline() -> Pipeline {
    Pipeline::new(sample_dataset(), replay_backends(&fixtures().join("replay")), PipelineSettings::default())
}

pub fn mock_pipeline() -> Pipeline {
    Pipeline::new(sample_dataset(), mock_backends(), PipelineSettings::default())
}

#[allow(clippy::too_many_arguments)]
pub fn record(
    id: u64,
    name: &str,
    product_type: &str,
    material_type: &str,
    family: &str,
    unit: &str,
    stages: (f64, f64, f64),
    biogenic: f64,
    density: Option<f64>,
) -> MaterialRecord {
    let mut value = json!({
        "id": id,
        "material_name": name,
        "product_type": product_type,
        "material_type": material_type,
        "material_type_family": family,
        "functional_unit_quantity": "1",
        "functional_unit_unit": unit,
        "carbon_a1a3": stages.0,
        "carbon_a5": stages.1,
        "carbon_c1c4": stages.2,
        "total_biogenic_co2e": biogenic,
    });
    if let Some(d) = density {
        value["density"] = d.into();
    }
    serde_json::from_value(value).unwrap()
}

pub const VOCAB: &[&str] = &[
    "oak", "timber", "board", "boards", "panel", "panels", "stone", "limestone", "brick", "clay", "tile", "tiles",
    "glass", "steel", "concrete", "floor", "flooring", "wall", "cladding", "deck", "decking", "hardwood", "cork",
    "plaster", "gypsum", "slab", "ceramic", "glazed", "polished", "rough", "white", "grey", "the", "a", "on", "of",
];

fn words(rng: &mut StdRng, n: usize) -> String {
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A dataset of up to `max` records with names drawn from [`VOCAB`],
/// including deliberate near-duplicates so ties occur.
pub fn random_dataset(rng: &mut StdRng, max: usize) -> MaterialDataset {
    let n = rng.random_range(1..=max);
    let mut ids: Vec<u64> = (1..=(n as u64 * 3)).collect();
    ids.shuffle(rng);
    let mut names = BTreeSet::new();
    let mut records = Vec::new();
    for &id in ids.iter().take(n) {
        let unit = *["kg", "m2", "m3", "piece"].choose(rng).unwrap();
        let name = loop {
            let len = rng.random_range(1..=4);
            let head = words(rng, 1);
            let candidate = format!("{head}, {} {id} (per {unit})", words(rng, len));
            let key = candidate.to_lowercase();
            if names.insert(key) {
                break candidate;
            }
        };
        let pt = words(rng, 1);
        let mt_len = rng.random_range(0..=2);
        let mt = words(rng, mt_len);
        let fam = words(rng, 1);
        records.push(record(id, &name, &pt, &mt, &fam, unit, (1.0, 0.1, 0.2), 0.0, None));
    }
    MaterialDataset::from_records(records, "random").unwrap().dataset
}

pub fn random_description(rng: &mut StdRng, dataset: &MaterialDataset) -> String {
    if rng.random_bool(0.1) {
        let r = dataset.records().choose(rng).unwrap();
        return format!("  {}  ", r.material_name.to_uppercase());
    }
    let n = rng.random_range(1..=8);
    let mut text = words(rng, n);
    if rng.random_bool(0.3) {
        text.push_str(", with a (per kg) note!");
    }
    text
}

/// Exhaustive Jaccard argmax, written independently of the library: its own
/// tokenizer, float scores, and a linear scan keeping the first (lowest id)
/// record on ties.
pub mod oracle {
    use std::collections::HashSet;

    use insightgen::materials::MaterialDataset;

    fn strip_units(text: &str) -> String {
        let mut out = String::new();
        let mut rest = text;
        while let Some(open) = rest.find('(') {
            let after = &rest[open + 1..];
            let inner_start = after.trim_start();
            let close = after.find(')');
            match close {
                Some(close) if inner_start.starts_with("per") && inner_start[3..].starts_with(char::is_whitespace) => {
                    out.push_str(&rest[..open]);
                    out.push(' ');
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push_str(&rest[..open + 1]);
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }

    pub fn tokens(text: &str) -> HashSet<String> {
        let lowered = text.to_lowercase();
        let mut set = HashSet::new();
        let mut current = String::new();
        for c in strip_units(&lowered).chars().chain(std::iter::once(' ')) {
            if c.is_alphanumeric() {
                current.push(c);
            } else if !current.is_empty() {
                let mut t = std::mem::take(&mut current);
                if t.len() > 2 && t.ends_with('s') {
                    t.pop();
                }
                set.insert(t);
            }
        }
        set
    }

    pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
        let shared = a.intersection(b).count();
        let union = a.len() + b.len() - shared;
        if union == 0 {
            0.0
        } else {
            shared as f64 / union as f64
        }
    }

    fn normalized(name: &str) -> String {
        name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
    }

    /// (record id, score) the matcher should return.
    pub fn best(description: &str, dataset: &MaterialDataset) -> (u64, f64) {
        let mut records: Vec<_> = dataset.records().iter().collect();
        records.sort_by_key(|r| r.id);
        if let Some(r) = records.iter().find(|r| normalized(&r.material_name) == normalized(description)) {
            return (r.id, 1.0);
        }
        let query = tokens(description);
        let mut best: Option<(u64, f64)> = None;
        for r in records {
            let text = format!(
                "{} {} {} {}",
                r.material_name, r.material_type, r.product_type, r.material_type_family
            );
            let score = jaccard(&query, &tokens(&text));
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((r.id, score));
            }
        }
        best.unwrap()
    }
}

/// Record mock responses for `prompts` into `dir` and return the dataset
/// used. Replaying `dir` afterwards reproduces the same scenario offline.
pub fn record_scenario(dir: &Path, dataset: Arc<MaterialDataset>, prompts: &[String], settings: &PipelineSettings) {
    let backends = Backends::from_config(&GatewayConfig {
        mode: GatewayMode::Mock,
        fixtures: Some(dir.to_path_buf()),
        ..Default::default()
    })
    .unwrap();
    let pipeline = Pipeline::new(dataset, backends, settings.clone());
    for p in prompts {
        pipeline.run(p).unwrap();
    }
}

/// Decimal renderings of every carbon figure in `dataset`, as they would
/// appear in JSON or a table.
pub fn carbon_value_strings(dataset: &MaterialDataset) -> Vec<String> {
    let mut out = Vec::new();
    for r in dataset.records() {
        let headline = r.carbon_a1a3 + r.carbon_a5 + r.carbon_c1c4;
        for v in [headline, r.total_biogenic_co2e] {
            for text in [format!("{v}"), format!("{v:.2}")] {
                if text.contains('.') {
                    out.push(text);
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}
