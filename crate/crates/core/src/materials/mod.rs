//! The general materials dictionary: loading, validation, stage-wise
//! embodied carbon, and per-kg normalization.

mod carbon;
mod dataset;
mod rank;
mod record;

pub use carbon::{
    embodied_carbon, normalization_note, normalize_per_kg, unit_label, CarbonBasis, CarbonQuantity,
    NormalizationError, StageSet,
};
pub use dataset::{load_dataset, validate_dataset, DatasetLoad, MaterialDataset, RecordViolation};
pub use rank::{rank_by_carbon, RankBasis};
pub use record::{FunctionalUnit, MaterialRecord};

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("empty dataset")]
    Empty,
    #[error("no valid records ({rejected} rejected)")]
    NoValidRecords { rejected: usize },
    #[error(
        "duplicate id {id}: record #{first_index} ({first_name:?}) and record #{second_index} ({second_name:?})"
    )]
    DuplicateId {
        id: u64,
        first_index: usize,
        first_name: String,
        second_index: usize,
        second_name: String,
    },
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaterialsError {
    #[error("EmptyInput: nothing to rank")]
    EmptyInput,
}

/// Load a dataset file from disk, labelling it with its path.
pub fn load_dataset_file(path: &Path) -> Result<DatasetLoad, DatasetError> {
    let file = std::fs::File::open(path)?;
    load_dataset(std::io::BufReader::new(file), &path.display().to_string())
}

/// Key for exact name lookup: case-folded, trimmed, internal whitespace
/// collapsed. Unit parentheticals are kept.
pub fn exact_name_key(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Key for fuzzy comparison: [`exact_name_key`] with a trailing unit
/// parenthetical such as `(per kg)` removed.
pub fn fuzzy_name_key(name: &str) -> String {
    let key = exact_name_key(name);
    match key.rfind('(') {
        Some(open) if key.ends_with(')') && key[open + 1..].starts_with("per ") => {
            key[..open].trim_end().to_string()
        }
        _ => key,
    }
}
