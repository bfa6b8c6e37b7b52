use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{response_text, Backend, GatewayError, GeneratedImage, PromptTemplates};
use crate::matcher::MaterialDescription;
use crate::text;

pub const MAX_MATERIALS: usize = 10;

pub const DEFAULT_BLOCKLIST: &[&str] =
    &["sofa", "chair", "table", "lamp", "rug", "cushion", "artwork", "plant", "curtain"];

/// Terms that mark a description as possibly furniture or decor without
/// removing it.
pub const DEFAULT_FLAG_TERMS: &[&str] =
    &["furniture", "decor", "decorative", "ornament", "shelf", "cabinet", "bed", "desk", "vase"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionFilter {
    pub blocklist: Vec<String>,
    pub flag_terms: Vec<String>,
}

impl Default for ExtractionFilter {
    fn default() -> Self {
        ExtractionFilter {
            blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            flag_terms: DEFAULT_FLAG_TERMS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ExtractionFilter {
    pub fn with_blocklist(blocklist: Vec<String>) -> Self {
        ExtractionFilter { blocklist, ..Default::default() }
    }

    fn first_hit<'a>(terms: &'a [String], tokens: &std::collections::BTreeSet<String>) -> Option<&'a str> {
        terms
            .iter()
            .find(|term| tokens.contains(text::fold_plural(&term.to_lowercase())))
            .map(String::as_str)
    }

    /// Split parsed lines into accepted descriptions (ranked 1..n) and
    /// filtered lines.
    fn apply(&self, lines: Vec<String>) -> (Vec<MaterialDescription>, Vec<FilteredLine>) {
        let mut accepted = Vec::new();
        let mut filtered = Vec::new();
        for line in lines {
            let tokens = text::tokens(&line);
            if let Some(hit) = Self::first_hit(&self.blocklist, &tokens) {
                filtered.push(FilteredLine { text: line, reason: format!("blocklist: {hit}") });
                continue;
            }
            if accepted.len() == MAX_MATERIALS {
                filtered.push(FilteredLine { text: line, reason: format!("limit: more than {MAX_MATERIALS} materials") });
                continue;
            }
            let hits = self
                .flag_terms
                .iter()
                .filter(|t| tokens.contains(text::fold_plural(&t.to_lowercase())))
                .cloned()
                .collect();
            accepted.push(MaterialDescription {
                text: line,
                source_rank: accepted.len() as u8 + 1,
                excluded_category_hits: hits,
            });
        }
        (accepted, filtered)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredLine {
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    /// At most ten, ranked 1..n in the backend's listing order.
    pub descriptions: Vec<MaterialDescription>,
    pub raw_response: String,
    pub filtered_out: Vec<FilteredLine>,
    /// Fewer than ten materials survived.
    pub shortfall: bool,
    /// Backend calls made (1, or 2 after a reformat retry).
    pub attempts: u32,
}

fn list_item() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d{1,2}\s*[.):]|[-*•])\s*(.+?)\s*$").expect("static regex"))
}

/// Pull numbered or bulleted one-line items out of a free-text response.
pub fn parse_material_lines(raw: &str) -> Vec<String> {
    raw.lines()
        .filter_map(|line| list_item().captures(line))
        .map(|caps| caps[1].replace("**", "").trim().to_string())
        .filter(|text| !text.is_empty())
        .collect()
}

/// Ask the vision-language backend for the material finishes visible in
/// `image`, then parse and post-filter its answer.
///
/// A response with no usable list gets one retry with a reformatting
/// instruction before failing.
pub fn extract_materials(
    image: &GeneratedImage,
    backend: &dyn Backend,
    prompts: &PromptTemplates,
    filter: &ExtractionFilter,
) -> Result<ExtractionResult, GatewayError> {
    let image_b64 = image.to_base64();
    let mut raw = String::new();
    for (attempt, reformat) in [(1u32, false), (2, true)] {
        let response = backend.call(&prompts.extract_request(&image_b64, reformat))?;
        raw = response_text(&response)?;
        let (descriptions, filtered_out) = filter.apply(parse_material_lines(&raw));
        if !descriptions.is_empty() {
            return Ok(ExtractionResult {
                shortfall: descriptions.len() < MAX_MATERIALS,
                descriptions,
                raw_response: raw,
                filtered_out,
                attempts: attempt,
            });
        }
    }
    Err(GatewayError::ExtractionParse { raw })
}
