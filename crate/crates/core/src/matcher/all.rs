use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{lexical_match, vlm_match, MatchError, MatchResult, MaterialDescription, VlmMatcher, DEFAULT_SHORTLIST};
use crate::gateway::MAX_MATERIALS;
use crate::materials::MaterialDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchOptions {
    /// Candidate list size for lexical matching. The VLM path uses the
    /// matcher's own shortlist size.
    pub k: usize,
    /// Upper bound on descriptions matched concurrently through a backend.
    pub workers: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { k: DEFAULT_SHORTLIST, workers: 4 }
    }
}

/// Match every description, returning one entry per description in
/// `source_rank` order. Per-item failures are returned in place; only bad
/// input as a whole fails the call. Results that repeat a record id already
/// chosen for a lower rank are flagged `duplicate`.
pub fn match_all(
    descs: &[MaterialDescription],
    dataset: &MaterialDataset,
    matcher: Option<&VlmMatcher>,
    options: &MatchOptions,
) -> Result<Vec<Result<MatchResult, MatchError>>, MatchError> {
    if descs.is_empty() {
        return Err(MatchError::EmptyInput);
    }
    if descs.len() > MAX_MATERIALS {
        return Err(MatchError::TooManyDescriptions(descs.len()));
    }
    let mut seen = HashSet::new();
    for d in descs {
        if !seen.insert(d.source_rank) {
            return Err(MatchError::DuplicateRank(d.source_rank));
        }
    }
    let mut ordered: Vec<&MaterialDescription> = descs.iter().collect();
    ordered.sort_by_key(|d| d.source_rank);

    let mut results = match matcher {
        None => ordered.iter().map(|d| lexical_match(d, dataset, options.k)).collect(),
        Some(matcher) => fan_out(&ordered, options.workers, |d| vlm_match(d, dataset, matcher)),
    };

    let mut chosen = BTreeSet::new();
    for result in results.iter_mut().flatten() {
        result.duplicate = !chosen.insert(result.record_id);
    }
    Ok(results)
}

/// Run `f` over `items` on up to `workers` threads, keeping input order.
pub(crate) fn fan_out<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
