use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{Candidate, MatchError, MatchMethod, MatchResult, MaterialDescription};
use crate::materials::{MaterialDataset, MaterialRecord};
use crate::text;

/// Jaccard similarity kept as exact integer counts so comparisons never
/// depend on floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Similarity {
    pub shared: usize,
    pub union: usize,
}

impl Similarity {
    pub fn between(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Similarity {
        let shared = a.intersection(b).count();
        Similarity { shared, union: a.len() + b.len() - shared }
    }

    pub fn score(self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            self.shared as f64 / self.union as f64
        }
    }

    /// Compare by value of `shared / union` using cross-multiplication.
    pub fn cmp_value(self, other: Similarity) -> Ordering {
        let lhs = self.shared * other.union.max(1);
        let rhs = other.shared * self.union.max(1);
        lhs.cmp(&rhs)
    }
}

/// Token set a record is matched on: name, material type, product type and
/// material family.
pub fn record_tokens(record: &MaterialRecord) -> BTreeSet<String> {
    text::tokens(&format!(
        "{} {} {} {}",
        record.material_name, record.material_type, record.product_type, record.material_type_family
    ))
}

/// All records scored against `description`, best first, ties by
/// ascending id.
pub(crate) fn ranked(description: &str, dataset: &MaterialDataset) -> Vec<(Similarity, u64, String)> {
    let query = text::tokens(description);
    let mut scored: Vec<(Similarity, u64, String)> = dataset
        .records()
        .iter()
        .map(|r| (Similarity::between(&query, &record_tokens(r)), r.id, r.material_name.clone()))
        .collect();
    scored.sort_by(|a, b| b.0.cmp_value(a.0).then(a.1.cmp(&b.1)));
    scored
}

pub(crate) fn validate(desc: &MaterialDescription, dataset: &MaterialDataset, k: usize) -> Result<(), MatchError> {
    if k == 0 {
        return Err(MatchError::InvalidShortlist);
    }
    if dataset.is_empty() {
        return Err(MatchError::EmptyDataset);
    }
    if desc.text.trim().is_empty() {
        return Err(MatchError::EmptyDescription);
    }
    Ok(())
}

/// Best record for `desc` by token-set Jaccard similarity, plus the top `k`
/// candidates. An exact normalized-name hit wins outright with score 1.0.
pub fn lexical_match(
    desc: &MaterialDescription,
    dataset: &MaterialDataset,
    k: usize,
) -> Result<MatchResult, MatchError> {
    validate(desc, dataset, k)?;
    let scored = ranked(&desc.text, dataset);
    let candidates: Vec<Candidate> = scored
        .iter()
        .take(k)
        .map(|(sim, id, name)| Candidate { record_id: *id, material_name: name.clone(), score: sim.score() })
        .collect();

    let (record_id, score, method) = match dataset.id_by_name(&desc.text) {
        Some(id) => (id, 1.0, MatchMethod::Exact),
        None => {
            let (sim, id, _) = &scored[0];
            (*id, sim.score(), MatchMethod::Lexical)
        }
    };
    let material_name = dataset.get(record_id).map(|r| r.material_name.clone()).unwrap_or_default();
    Ok(MatchResult {
        description: desc.clone(),
        record_id,
        material_name,
        score,
        method,
        candidates,
        duplicate: false,
        vlm_calls: 0,
    })
}
