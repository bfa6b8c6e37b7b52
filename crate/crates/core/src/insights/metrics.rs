use super::{InsightError, MaterialInsight, RemoteCache};
use crate::materials::{embodied_carbon, normalization_note, normalize_per_kg, MaterialDataset, StageSet};
use crate::matcher::MatchResult;

/// CO₂e figures for a matched record.
///
/// With a remote cache the fresher remote copy is preferred; any remote
/// failure falls back to the local dataset and says so in `source_note`.
pub fn fetch_metrics(
    matched: &MatchResult,
    dataset: &MaterialDataset,
    remote: Option<&RemoteCache>,
) -> Result<MaterialInsight, InsightError> {
    let local = dataset.get(matched.record_id);
    let (record, source_note) = match remote {
        Some(cache) => cache.resolve(matched.record_id, local)?,
        None => (local.cloned().ok_or(InsightError::UnknownMaterial(matched.record_id))?, None),
    };
    let raw_carbon = embodied_carbon(&record, StageSet::HEADLINE);
    let biogenic = embodied_carbon(&record, StageSet::BIOGENIC).value;
    let per_kg = normalize_per_kg(&record, &raw_carbon);
    let normalization_note = normalization_note(&record, &per_kg);
    Ok(MaterialInsight {
        description: matched.description.clone(),
        matched: matched.clone(),
        raw_carbon,
        biogenic,
        per_kg_carbon: per_kg.ok(),
        normalization_note,
        source_note,
    })
}
