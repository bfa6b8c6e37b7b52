use super::lexical::{lexical_match, validate};
use super::{MatchError, MatchMethod, MatchResult, MaterialDescription, DEFAULT_SHORTLIST};
use crate::gateway::{response_text, GatewayError, PromptTemplates, SharedBackend};
use crate::materials::{exact_name_key, MaterialDataset};

/// Vision-language matching agent: a backend, its prompt wording, and the
/// shortlist size offered to it.
#[derive(Clone)]
pub struct VlmMatcher {
    pub backend: SharedBackend,
    pub prompts: PromptTemplates,
    pub shortlist: usize,
}

impl VlmMatcher {
    pub fn new(backend: SharedBackend, prompts: PromptTemplates) -> Self {
        VlmMatcher { backend, prompts, shortlist: DEFAULT_SHORTLIST }
    }
}

enum Attempt {
    Valid(u64),
    Invalid(String),
    Transport(GatewayError),
}

/// Strip the decoration models like to add around a verbatim answer.
fn clean_answer(raw: &str) -> &str {
    let line = raw.trim().lines().next().unwrap_or_default().trim();
    let line = line.strip_prefix("Answer:").unwrap_or(line).trim();
    let line = line.strip_prefix("- ").unwrap_or(line);
    line.trim_matches(|c| matches!(c, '"' | '\'' | '`' | '*')).trim()
}

/// Ask the backend to choose one shortlisted record for `desc`.
///
/// The shortlist is the lexical top-k. An answer that is not a shortlisted
/// name gets one correction round; if that also fails the lexical result is
/// returned with method `vlm_fallback_lexical`. Two transport failures in a
/// row give `BackendUnavailable`. Exact name hits skip the backend.
pub fn vlm_match(
    desc: &MaterialDescription,
    dataset: &MaterialDataset,
    matcher: &VlmMatcher,
) -> Result<MatchResult, MatchError> {
    validate(desc, dataset, matcher.shortlist)?;
    let lexical = lexical_match(desc, dataset, matcher.shortlist)?;
    if lexical.method == MatchMethod::Exact {
        return Ok(lexical);
    }
    let shortlist: Vec<String> = lexical.candidates.iter().map(|c| c.material_name.clone()).collect();
    let accept = |answer: &str| -> Option<u64> {
        let key = exact_name_key(clean_answer(answer));
        lexical
            .candidates
            .iter()
            .find(|c| exact_name_key(&c.material_name) == key)
            .map(|c| c.record_id)
    };
    let ask = |previous: Option<&str>| -> Attempt {
        let request = matcher.prompts.match_request(&desc.text, &shortlist, previous);
        match matcher.backend.call(&request).and_then(|r| response_text(&r)) {
            Ok(answer) => match accept(&answer) {
                Some(id) => Attempt::Valid(id),
                None => Attempt::Invalid(answer),
            },
            Err(e @ GatewayError::MalformedResponse(_)) => Attempt::Invalid(e.to_string()),
            Err(e) => Attempt::Transport(e),
        }
    };

    let first = ask(None);
    let second = match &first {
        Attempt::Valid(_) => None,
        Attempt::Invalid(answer) => Some(ask(Some(answer))),
        Attempt::Transport(_) => Some(ask(None)),
    };
    let calls = if second.is_some() { 2 } else { 1 };
    let outcome = match (first, second) {
        (Attempt::Valid(id), _) | (_, Some(Attempt::Valid(id))) => Ok(id),
        (Attempt::Transport(_), Some(Attempt::Transport(e))) => {
            return Err(MatchError::BackendUnavailable(e.to_string()))
        }
        _ => Err(()),
    };
    Ok(match outcome {
        Ok(record_id) => MatchResult {
            record_id,
            material_name: dataset.get(record_id).map(|r| r.material_name.clone()).unwrap_or_default(),
            score: 1.0,
            method: MatchMethod::Vlm,
            vlm_calls: calls,
            ..lexical
        },
        Err(()) => MatchResult { method: MatchMethod::VlmFallbackLexical, vlm_calls: calls, ..lexical },
    })
}
