//! Token normalization shared by the lexical matcher and the extraction
//! post-filter.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

fn unit_parenthetical() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\s*per\s[^)]*\)").expect("static regex"))
}

/// Fold a plural by stripping one trailing `s`. Tokens of two characters
/// or fewer are left alone.
pub fn fold_plural(token: &str) -> &str {
    if token.len() > 2 {
        token.strip_suffix('s').unwrap_or(token)
    } else {
        token
    }
}

/// Lowercase, drop `(per …)` unit parentheticals, split on anything that is
/// not alphanumeric, and fold plurals.
pub fn token_list(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let stripped = unit_parenthetical().replace_all(&lowered, " ");
    stripped
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| fold_plural(t).to_string())
        .collect()
}

/// Set form of [`token_list`].
pub fn tokens(text: &str) -> BTreeSet<String> {
    token_list(text).into_iter().collect()
}
