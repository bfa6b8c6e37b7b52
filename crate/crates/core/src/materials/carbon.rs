use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use super::record::{FunctionalUnit, MaterialRecord};

bitflags! {
    /// Life-cycle stages to include in an embodied carbon sum.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    pub struct StageSet: u8 {
        const A1A3 = 0b0001;
        const A5 = 0b0010;
        const C1C4 = 0b0100;
        /// Signed biogenic carbon. Never part of the headline figure.
        const BIOGENIC = 0b1000;
    }
}

impl StageSet {
    /// Stages making up the headline figure shown to users.
    pub const HEADLINE: StageSet = StageSet::A1A3.union(StageSet::A5).union(StageSet::C1C4);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarbonBasis {
    PerFunctionalUnit,
    PerKg,
}

/// A CO₂e value with the basis it is expressed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonQuantity {
    /// kg CO₂e
    pub value: f64,
    pub basis: CarbonBasis,
    pub unit_label: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormalizationError {
    #[error("NormalizationUnsupported: {reason}")]
    Unsupported { unit: FunctionalUnit, reason: String },
    #[error("quantity is already expressed per kg")]
    AlreadyPerKg,
}

pub fn unit_label(basis: CarbonBasis, unit: FunctionalUnit) -> String {
    match basis {
        CarbonBasis::PerFunctionalUnit => format!("kg CO₂e / {}", unit.symbol()),
        CarbonBasis::PerKg => "kg CO₂e / kg".to_string(),
    }
}

/// Sum the selected life-cycle stage fields of `record`.
///
/// The result is per single unit of the record's functional unit: when the
/// declared functional quantity is not 1 the stage sum is divided by it.
pub fn embodied_carbon(record: &MaterialRecord, stages: StageSet) -> CarbonQuantity {
    let mut total = 0.0;
    if stages.contains(StageSet::A1A3) {
        total += record.carbon_a1a3;
    }
    if stages.contains(StageSet::A5) {
        total += record.carbon_a5;
    }
    if stages.contains(StageSet::C1C4) {
        total += record.carbon_c1c4;
    }
    if stages.contains(StageSet::BIOGENIC) {
        total += record.total_biogenic_co2e;
    }
    if record.functional_unit_quantity != 1.0 {
        total /= record.functional_unit_quantity;
    }
    CarbonQuantity {
        value: total,
        basis: CarbonBasis::PerFunctionalUnit,
        unit_label: unit_label(CarbonBasis::PerFunctionalUnit, record.functional_unit_unit),
    }
}

/// Re-express a per-functional-unit quantity per kilogram of material.
///
/// Only mass units and volumetric units with a known density convert. The
/// conversion is linear and therefore approximate.
pub fn normalize_per_kg(
    record: &MaterialRecord,
    quantity: &CarbonQuantity,
) -> Result<CarbonQuantity, NormalizationError> {
    if quantity.basis == CarbonBasis::PerKg {
        return Err(NormalizationError::AlreadyPerKg);
    }
    let value = match record.functional_unit_unit {
        FunctionalUnit::Kg => quantity.value,
        FunctionalUnit::M3 => match record.density {
            Some(density) => quantity.value / density,
            None => {
                return Err(NormalizationError::Unsupported {
                    unit: FunctionalUnit::M3,
                    reason: format!("record {} is per m³ but has no density", record.id),
                })
            }
        },
        unit @ (FunctionalUnit::M2 | FunctionalUnit::Piece) => {
            return Err(NormalizationError::Unsupported {
                unit,
                reason: format!(
                    "record {} is per {}; no thickness or mass model to convert it",
                    record.id,
                    unit.symbol()
                ),
            })
        }
    };
    Ok(CarbonQuantity {
        value,
        basis: CarbonBasis::PerKg,
        unit_label: unit_label(CarbonBasis::PerKg, record.functional_unit_unit),
    })
}

/// Note attached to a displayed per-kg value, describing how it was derived.
pub fn normalization_note(
    record: &MaterialRecord,
    result: &Result<CarbonQuantity, NormalizationError>,
) -> String {
    match (result, record.functional_unit_unit) {
        (Ok(_), FunctionalUnit::Kg) => "declared per kg".to_string(),
        (Ok(_), unit) => format!(
            "approximate, linear scaling from {} via density {} kg/m³",
            unit.symbol(),
            record.density.unwrap_or_default()
        ),
        (Err(e), _) => format!("n/a (unit not normalizable): {e}"),
    }
}
