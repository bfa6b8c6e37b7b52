//! Maps free-text material descriptions onto dataset records.
//!
//! [`lexical_match`] is a deterministic token-set Jaccard scorer; it is both
//! the offline fallback and the shortlist generator for [`vlm_match`], which
//! asks a vision-language backend to pick one shortlisted name.

mod all;
mod lexical;
mod vlm;

pub use all::{match_all, MatchOptions};
pub use lexical::{lexical_match, record_tokens, Similarity};
pub use vlm::{vlm_match, VlmMatcher};

use serde::{Deserialize, Serialize};

/// Default shortlist and candidate list size.
pub const DEFAULT_SHORTLIST: usize = 10;

/// One material as described by the extractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialDescription {
    pub text: String,
    /// Position in the extractor's listing, 1-based.
    pub source_rank: u8,
    #[serde(default)]
    pub excluded_category_hits: Vec<String>,
}

impl MaterialDescription {
    pub fn new(text: impl Into<String>, source_rank: u8) -> Self {
        MaterialDescription { text: text.into(), source_rank, excluded_category_hits: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Exact,
    Lexical,
    Vlm,
    VlmFallbackLexical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub record_id: u64,
    pub material_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub description: MaterialDescription,
    pub record_id: u64,
    pub material_name: String,
    /// In [0, 1]. 1.0 for exact name hits and for backend-confirmed picks.
    pub score: f64,
    pub method: MatchMethod,
    /// Lexical top-k, best first.
    pub candidates: Vec<Candidate>,
    /// Another description earlier in the same report matched this record.
    #[serde(default)]
    pub duplicate: bool,
    #[serde(default)]
    pub vlm_calls: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("EmptyDataset: dataset has no records")]
    EmptyDataset,
    #[error("EmptyDescription: description is blank")]
    EmptyDescription,
    #[error("EmptyInput: no descriptions to match")]
    EmptyInput,
    #[error("TooManyDescriptions: {0} descriptions, at most 10 allowed")]
    TooManyDescriptions(usize),
    #[error("DuplicateRank: source_rank {0} appears more than once")]
    DuplicateRank(u8),
    #[error("InvalidShortlist: k must be at least 1")]
    InvalidShortlist,
    #[error("BackendUnavailable: {0}")]
    BackendUnavailable(String),
}

impl MatchError {
    pub fn kind(&self) -> &'static str {
        match self {
            MatchError::EmptyDataset => "EmptyDataset",
            MatchError::EmptyDescription => "EmptyDescription",
            MatchError::EmptyInput => "EmptyInput",
            MatchError::TooManyDescriptions(_) => "TooManyDescriptions",
            MatchError::DuplicateRank(_) => "DuplicateRank",
            MatchError::InvalidShortlist => "InvalidShortlist",
            MatchError::BackendUnavailable(_) => "BackendUnavailable",
        }
    }
}
