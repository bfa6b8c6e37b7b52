//! Prompt → image → material descriptions → matches → CO₂e metrics, as one
//! call producing an [`InsightReport`].

mod metrics;
mod pipeline;
mod remote;
mod render;

pub use metrics::fetch_metrics;
pub use pipeline::{
    run_pipeline, MatcherKind, Pipeline, PipelineCondition, PipelineConfig, PipelineRun, PipelineSettings,
};
pub use remote::{HttpMaterialsRemote, MaterialsRemote, RemoteCache, RemoteError, MATERIALS_API_KEY_ENV};
pub use render::{render_report, ReportFormat};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gateway::{GatewayError, GatewayMode, ImageRef};
use crate::materials::CarbonQuantity;
use crate::matcher::{MatchError, MatchResult, MaterialDescription};

/// Field names and labels that only appear when carbon data is present.
/// Used to prove hidden-metrics output is clean.
pub const CARBON_MARKERS: &[&str] = &[
    "carbon_a1a3",
    "carbon_a5",
    "carbon_c1c4",
    "total_biogenic_co2e",
    "raw_carbon",
    "per_kg_carbon",
    "biogenic",
    "kg CO₂e",
    "CO₂e",
];

/// True if `text` contains any of [`CARBON_MARKERS`].
pub fn contains_carbon_markers(text: &str) -> bool {
    CARBON_MARKERS.iter().any(|m| text.contains(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    MetricsShown,
    MetricsHidden,
}

/// One identified material with its matched record and CO₂e figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialInsight {
    pub description: MaterialDescription,
    #[serde(rename = "match")]
    pub matched: MatchResult,
    /// A1-A3 + A5 + C1-C4 per functional unit, biogenic excluded.
    pub raw_carbon: CarbonQuantity,
    /// Signed kg CO₂e per functional unit, shown as its own line.
    pub biogenic: f64,
    pub per_kg_carbon: Option<CarbonQuantity>,
    pub normalization_note: String,
    /// Set when the values came from a stale or fallback source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_note: Option<String>,
}

/// A material the pipeline identified but could not resolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedInsight {
    pub description: MaterialDescription,
    pub error_kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum InsightEntry {
    Resolved(MaterialInsight),
    Failed(FailedInsight),
}

impl InsightEntry {
    pub fn description(&self) -> &MaterialDescription {
        match self {
            InsightEntry::Resolved(i) => &i.description,
            InsightEntry::Failed(f) => &f.description,
        }
    }

    pub fn insight(&self) -> Option<&MaterialInsight> {
        match self {
            InsightEntry::Resolved(i) => Some(i),
            InsightEntry::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    pub status: StageStatus,
    pub calls: u32,
    pub detail: String,
    /// Wall-clock time; recorded in live mode only so replayed runs stay
    /// byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub mode: GatewayMode,
    pub stages: Vec<StageTrace>,
    pub t2i_calls: u32,
    pub vlm_calls: u32,
}

/// Generated image plus the materials found in it, in extraction rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightReport {
    pub image: ImageRef,
    pub insights: Vec<InsightEntry>,
    pub condition_visibility: Visibility,
    pub shortfall: bool,
    pub pipeline_trace: PipelineTrace,
}

impl InsightReport {
    /// The form shown to a participant: with metrics hidden, no insight
    /// entries survive.
    pub fn user_facing(&self) -> InsightReport {
        let mut report = self.clone();
        if report.condition_visibility == Visibility::MetricsHidden {
            report.insights.clear();
        }
        report
    }

    pub fn resolved(&self) -> impl Iterator<Item = &MaterialInsight> {
        self.insights.iter().filter_map(InsightEntry::insight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    T2i,
    Extract,
    Match,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::T2i => "t2i",
            Stage::Extract => "extract",
            Stage::Match => "match",
            Stage::Metrics => "metrics",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InsightError {
    #[error("UnknownMaterial: record {0} is not in the local dataset or the remote database")]
    UnknownMaterial(u64),
}

/// A hard failure that aborted a pipeline run, tagged with the component
/// that failed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("{stage}: {source}")]
    Gateway { stage: Stage, source: GatewayError },
    #[error("{stage}: {source}")]
    Match { stage: Stage, source: MatchError },
    #[error("config: {0}")]
    Config(String),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Gateway { stage, .. } | PipelineError::Match { stage, .. } => *stage,
            PipelineError::Config(_) => Stage::Config,
        }
    }

    /// Variant name of the underlying error.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Gateway { source, .. } => source.kind(),
            PipelineError::Match { source, .. } => source.kind(),
            PipelineError::Config(_) => "ConfigError",
        }
    }
}
