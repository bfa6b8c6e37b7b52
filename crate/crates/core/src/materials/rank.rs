use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::MaterialsError;
use crate::insights::MaterialInsight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBasis {
    /// Per-kg values first (descending), then unnormalized insights by raw value.
    #[default]
    PerKgPreferred,
    /// Raw per-functional-unit headline value only.
    Raw,
}

/// Order insights from highest to lowest CO₂e for display.
///
/// Ties are broken by ascending matched record id; the sort is stable.
pub fn rank_by_carbon(
    insights: &[MaterialInsight],
    basis: RankBasis,
) -> Result<Vec<MaterialInsight>, MaterialsError> {
    if insights.is_empty() {
        return Err(MaterialsError::EmptyInput);
    }
    let mut ranked = insights.to_vec();
    ranked.sort_by(|a, b| compare(a, b, basis));
    Ok(ranked)
}

fn compare(a: &MaterialInsight, b: &MaterialInsight, basis: RankBasis) -> Ordering {
    let by_value = match basis {
        RankBasis::Raw => b.raw_carbon.value.total_cmp(&a.raw_carbon.value),
        RankBasis::PerKgPreferred => match (&a.per_kg_carbon, &b.per_kg_carbon) {
            (Some(x), Some(y)) => y.value.total_cmp(&x.value),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => b.raw_carbon.value.total_cmp(&a.raw_carbon.value),
        },
    };
    by_value.then_with(|| a.matched.record_id.cmp(&b.matched.record_id))
}
