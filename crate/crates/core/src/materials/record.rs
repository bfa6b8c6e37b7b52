use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Quantity basis a record's metrics are declared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionalUnit {
    #[serde(rename = "kg")]
    Kg,
    #[serde(rename = "m2", alias = "m²", alias = "m^2")]
    M2,
    #[serde(rename = "m3", alias = "m³", alias = "m^3")]
    M3,
    #[serde(rename = "piece", alias = "pieces", alias = "unit", alias = "item")]
    Piece,
}

impl FunctionalUnit {
    /// Human-readable unit symbol used in display labels.
    pub fn symbol(self) -> &'static str {
        match self {
            FunctionalUnit::Kg => "kg",
            FunctionalUnit::M2 => "m²",
            FunctionalUnit::M3 => "m³",
            FunctionalUnit::Piece => "piece",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionalUnit::Kg => "kg",
            FunctionalUnit::M2 => "m2",
            FunctionalUnit::M3 => "m3",
            FunctionalUnit::Piece => "piece",
        }
    }
}

impl fmt::Display for FunctionalUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of the general materials dictionary.
///
/// Field names follow the upstream dataset export. Carbon fields are kg CO₂e
/// per functional unit. Fields this type does not know about are kept in
/// `extra` and written back out unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRecord {
    pub id: u64,
    pub material_name: String,
    #[serde(default)]
    pub product_type: String,
    #[serde(default)]
    pub product_type_family: Vec<String>,
    #[serde(default)]
    pub material_type: String,
    #[serde(default)]
    pub material_type_family: String,
    #[serde(default)]
    pub group_elements_nrm_1: Vec<String>,
    #[serde(default)]
    pub elements_nrm_1: Vec<String>,
    #[serde(default)]
    pub uniclass_systems: Vec<String>,
    #[serde(default)]
    pub uniclass_products: Vec<String>,
    #[serde(with = "decimal_text")]
    pub functional_unit_quantity: f64,
    pub functional_unit_unit: FunctionalUnit,
    pub carbon_a1a3: f64,
    pub carbon_a5: f64,
    pub carbon_c1c4: f64,
    pub total_biogenic_co2e: f64,
    #[serde(default)]
    pub freshwater_use_a1a3: Option<f64>,
    #[serde(default)]
    pub reuse_potential: Option<f64>,
    #[serde(default, with = "scientific_text")]
    pub odp: Option<f64>,
    #[serde(default)]
    pub density: Option<f64>,
    #[serde(default)]
    pub data_source: String,
    #[serde(default)]
    pub created: Option<DateTime<Utc>>,
    #[serde(default)]
    pub updated: Option<DateTime<Utc>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl MaterialRecord {
    /// Check the record-level invariants, returning every violation found.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.material_name.trim().is_empty() {
            out.push("material_name is blank".to_string());
        }
        if !(self.functional_unit_quantity.is_finite() && self.functional_unit_quantity > 0.0) {
            out.push(format!(
                "functional_unit_quantity must be > 0 (got {})",
                self.functional_unit_quantity
            ));
        }
        for (field, value) in [
            ("carbon_a1a3", self.carbon_a1a3),
            ("carbon_a5", self.carbon_a5),
            ("carbon_c1c4", self.carbon_c1c4),
        ] {
            if !value.is_finite() || value < 0.0 {
                out.push(format!("{field} must be a finite number >= 0 (got {value})"));
            }
        }
        if !self.total_biogenic_co2e.is_finite() {
            out.push("total_biogenic_co2e must be finite".to_string());
        }
        if let Some(density) = self.density {
            if !(density.is_finite() && density > 0.0) {
                out.push(format!("density must be > 0 when present (got {density})"));
            }
        }
        out
    }
}

/// Decimal that the upstream export writes either as a JSON number or as a
/// quoted string (`"functional_unit_quantity": "1"`). Written back as text.
mod decimal_text {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n.as_f64().ok_or_else(|| D::Error::custom("number out of range")),
            Value::String(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| D::Error::custom(format!("not a decimal: {s:?}"))),
            other => Err(D::Error::custom(format!("expected decimal, got {other}"))),
        }
    }
}

/// Optional decimal stored as a string in scientific notation (`"3.63e-10"`).
mod scientific_text {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_str(&format!("{v:e}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Value::deserialize(d)? {
            Value::Null => Ok(None),
            Value::Number(n) => Ok(n.as_f64()),
            Value::String(s) if s.trim().is_empty() => Ok(None),
            Value::String(s) => s
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| D::Error::custom(format!("not a decimal: {s:?}"))),
            other => Err(D::Error::custom(format!("expected decimal string, got {other}"))),
        }
    }
}
