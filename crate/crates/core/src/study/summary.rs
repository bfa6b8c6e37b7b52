use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Condition, Session, SessionStatus, StudyError};

/// Raw score sums; percentages are derived from these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTotals {
    pub sessions: usize,
    pub sustainability_considered: f64,
    pub satisfaction: f64,
    pub insights_useful: f64,
    pub insights_useful_answers: usize,
}

impl ScoreTotals {
    pub fn merge(self, other: ScoreTotals) -> ScoreTotals {
        ScoreTotals {
            sessions: self.sessions + other.sessions,
            sustainability_considered: self.sustainability_considered + other.sustainability_considered,
            satisfaction: self.satisfaction + other.satisfaction,
            insights_useful: self.insights_useful + other.insights_useful,
            insights_useful_answers: self.insights_useful_answers + other.insights_useful_answers,
        }
    }

    /// Unrounded 100 × mean.
    pub fn pct(total: f64, n: usize) -> f64 {
        100.0 * total / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub n_participants: usize,
    pub sustainability_considered_pct: f64,
    pub satisfaction_pct: f64,
    /// T3 only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insights_useful_pct: Option<f64>,
    pub totals: ScoreTotals,
}

/// Per-condition results. Conditions with no sessions are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub conditions: BTreeMap<Condition, ConditionSummary>,
}

fn one_decimal(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Aggregate complete sessions into percentages (100 × mean score, one
/// decimal place).
pub fn summarize_study(sessions: &[Session]) -> Result<StudySummary, StudyError> {
    let mut totals: BTreeMap<Condition, (ScoreTotals, BTreeSet<&str>)> = BTreeMap::new();
    for session in sessions {
        let survey = match (&session.status, &session.final_survey) {
            (SessionStatus::Complete, Some(s)) => s,
            _ => return Err(StudyError::IncompleteStudy(session.session_id.clone())),
        };
        let (t, participants) = totals.entry(session.condition).or_default();
        participants.insert(&session.participant_label);
        t.sessions += 1;
        t.sustainability_considered += survey.sustainability_considered.score;
        t.satisfaction += survey.satisfaction.score;
        if let Some(useful) = survey.insights_useful {
            t.insights_useful += useful.score;
            t.insights_useful_answers += 1;
        }
    }
    let conditions = totals
        .into_iter()
        .map(|(condition, (t, participants))| {
            let summary = ConditionSummary {
                n_participants: participants.len(),
                sustainability_considered_pct: one_decimal(ScoreTotals::pct(t.sustainability_considered, t.sessions)),
                satisfaction_pct: one_decimal(ScoreTotals::pct(t.satisfaction, t.sessions)),
                insights_useful_pct: (condition == Condition::T3 && t.insights_useful_answers > 0)
                    .then(|| one_decimal(ScoreTotals::pct(t.insights_useful, t.insights_useful_answers))),
                totals: t,
            };
            (condition, summary)
        })
        .collect();
    Ok(StudySummary { conditions })
}

/// Aligned text version of the summary.
pub fn render_summary_table(summary: &StudySummary) -> String {
    let mut out = String::new();
    if summary.conditions.is_empty() {
        out.push_str("no sessions\n");
        return out;
    }
    let _ = writeln!(
        out,
        "{:<10} {:>4} {:>17} {:>15} {:>18}",
        "Condition", "n", "Sustainability %", "Satisfaction %", "Insights useful %"
    );
    for (condition, s) in &summary.conditions {
        let useful = s.insights_useful_pct.map(|p| format!("{p:.1}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<10} {:>4} {:>17.1} {:>15.1} {:>18}",
            condition.as_str(),
            s.n_participants,
            s.sustainability_considered_pct,
            s.satisfaction_pct,
            useful
        );
    }
    out
}
