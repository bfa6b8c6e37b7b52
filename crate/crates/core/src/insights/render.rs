use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{InsightEntry, InsightReport, Visibility};
use crate::canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    TextTable,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text_table" | "table" | "text" => Ok(ReportFormat::TextTable),
            other => Err(format!("unknown format {other:?} (expected json or text_table)")),
        }
    }
}

/// Render the participant-facing form of `report`. JSON output is
/// canonical (sorted keys), so equal reports render to equal bytes.
pub fn render_report(report: &InsightReport, format: ReportFormat) -> String {
    let report = report.user_facing();
    match format {
        ReportFormat::Json => {
            canonical::to_canonical_pretty(&report).expect("report serializes")
        }
        ReportFormat::TextTable => text_table(&report),
    }
}

fn clip(text: &str, width: usize) -> String {
    if text.chars().count() <= width {
        return text.to_string();
    }
    let mut out: String = text.chars().take(width - 1).collect();
    out.push('…');
    out
}

fn text_table(report: &InsightReport) -> String {
    let mut out = String::new();
    let image = &report.image;
    let _ = writeln!(out, "Image:   {}.{}", image.image_id, image.media_type.extension());
    let _ = writeln!(out, "Prompt:  {}", image.prompt_text);
    let _ = writeln!(out, "Backend: {} ({})", image.backend_label, report.pipeline_trace.mode);
    if report.condition_visibility == Visibility::MetricsHidden {
        let _ = writeln!(out, "\nMaterial insights are not shown in this session.");
        return out;
    }
    if report.shortfall {
        let _ = writeln!(out, "Note:    fewer than ten materials were identified");
    }
    let _ = writeln!(
        out,
        "\n{:>2}  {:<40}  {:<36}  {:>14}  {:>10}  {:>27}  {}",
        "#", "Description", "Matched material", "CO₂e/unit", "Biogenic", "CO₂e/kg", "Unit"
    );
    for entry in &report.insights {
        let rank = entry.description().source_rank;
        match entry {
            InsightEntry::Resolved(i) => {
                let per_kg = match &i.per_kg_carbon {
                    Some(q) => format!("{:.4}", q.value),
                    None => "n/a (unit not normalizable)".to_string(),
                };
                let mut name = clip(&i.matched.material_name, 36);
                if i.matched.duplicate {
                    name = clip(&format!("{name} (repeat)"), 36);
                }
                let _ = writeln!(
                    out,
                    "{:>2}  {:<40}  {:<36}  {:>14.2}  {:>10.2}  {:>27}  {}",
                    rank,
                    clip(&i.description.text, 40),
                    name,
                    i.raw_carbon.value,
                    i.biogenic,
                    per_kg,
                    i.raw_carbon.unit_label
                );
                if let Some(note) = &i.source_note {
                    let _ = writeln!(out, "    note: {note}");
                }
            }
            InsightEntry::Failed(f) => {
                let _ = writeln!(
                    out,
                    "{:>2}  {:<40}  unmatched ({}): {}",
                    rank,
                    clip(&f.description.text, 40),
                    f.error_kind,
                    f.message
                );
            }
        }
    }
    out
}
