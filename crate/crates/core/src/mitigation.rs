//! Hedging rewrites for flagged statements and their re-scoring.

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::causal::{self, Form, Relation};
use crate::extract::{Statement, StatementId};
use crate::kind::ProbeKind;
use crate::probe::Counterfactual;
use crate::scoring::{detect_statement, ScoringError, ScoringWeights, SensitivityReport};
use crate::text::{self, capitalize_first, decapitalize_first};

#[derive(Debug, thiserror::Error)]
pub enum MitigationError {
    #[error("no {0} rewrite site in statement")]
    NoRewriteSite(ProbeKind),
    #[error("{0} is not among the statement's claim kinds")]
    KindNotApplicable(ProbeKind),
    #[error("statement is not flagged; only flagged statements are mitigated")]
    NotFlagged,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigatedStatement {
    pub statement_id: StatementId,
    pub original_text: String,
    pub mitigated_text: String,
    pub strategy: ProbeKind,
    pub score_before: f64,
    pub score_after: f64,
    pub improvement: f64,
}

impl MitigatedStatement {
    pub fn is_successful(&self) -> bool {
        self.improvement > 0.0
    }
}

const COPULAS: [&str; 4] = ["is", "are", "was", "were"];
const FACTUAL_HEDGES: [&str; 2] = ["reportedly", "likely"];
const IRREGULAR_VERBS: [&str; 22] = [
    "has", "have", "had", "led", "made", "won", "began", "became", "wrote", "built", "found", "gave", "took", "fought",
    "sank", "ran", "held", "lies", "flows", "orbits", "causes", "leads",
];
const TEMPORAL_HEDGES: [&str; 4] = ["around", "circa", "about", "approximately"];
const QUANT_HEDGES: [&str; 8] = ["approximately", "about", "around", "roughly", "nearly", "almost", "circa", "some"];
const PRECISION_WORDS: [&str; 2] = ["exactly", "precisely"];
const LEADING_FUNCTION_WORDS: [&str; 9] = ["the", "a", "an", "this", "that", "these", "those", "it", "there"];

/// Word spans with their lowercase text.
fn word_list(text: &str) -> Vec<(usize, usize, String)> {
    text::words(text).into_iter().map(|(s, e)| (s, e, text[s..e].to_lowercase())).collect()
}

/// The word immediately before byte offset `at`, if any.
fn previous_word(text: &str, at: usize) -> Option<(usize, usize, String)> {
    word_list(&text[..at]).pop()
}

fn has_word(text: &str, options: &[&str]) -> bool {
    word_list(text).iter().any(|(_, _, w)| options.contains(&w.as_str()))
}

/// Matches the case of the word being replaced.
fn cased_like(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        capitalize_first(replacement)
    } else {
        replacement.to_string()
    }
}

enum Qualify {
    Rewritten(String),
    AlreadyHedged,
}

/// Puts `qualifier` in front of the expression starting at `start`: a
/// preceding word from `replace` is swapped for it, a preceding word from
/// `hedges` means nothing needs doing.
fn qualify(text: &str, start: usize, qualifier: &str, replace: &[&str], hedges: &[&str]) -> Qualify {
    match previous_word(text, start) {
        Some((_, _, w)) if hedges.contains(&w.as_str()) => Qualify::AlreadyHedged,
        Some((s, e, w)) if replace.contains(&w.as_str()) => {
            let q = cased_like(&text[s..e], qualifier);
            Qualify::Rewritten(format!("{}{q}{}", &text[..s], &text[e..]))
        }
        _ if start == 0 => {
            let rest = decapitalize_first(&text[start..]);
            Qualify::Rewritten(format!("{} {rest}", capitalize_first(qualifier)))
        }
        _ => Qualify::Rewritten(format!("{}{qualifier} {}", &text[..start], &text[start..])),
    }
}

/// Applies `qualify` to every site, right to left so earlier offsets stay valid.
fn qualify_all(text: &str, starts: &[usize], qualifier: &str, replace: &[&str], hedges: &[&str]) -> String {
    let mut out = text.to_string();
    for &start in starts.iter().rev() {
        if let Qualify::Rewritten(s) = qualify(&out, start, qualifier, replace, hedges) {
            out = s;
        }
    }
    out
}

fn is_verb(word: &str, original: &str) -> bool {
    let lowercase = original.chars().next().is_some_and(char::is_lowercase);
    IRREGULAR_VERBS.contains(&word) || (lowercase && word.len() > 3 && word.ends_with("ed"))
}

fn hedge_factual(body: &str) -> Option<String> {
    if has_word(body, &FACTUAL_HEDGES) {
        return Some(body.to_string());
    }
    let offset = text::clause_start(body, body.len());
    let (prefix, clause) = body.split_at(offset);
    let words = word_list(clause);
    if let Some((_, end, _)) = words.iter().skip(1).find(|(_, _, w)| COPULAS.contains(&w.as_str())) {
        return Some(format!("{prefix}{} reportedly{}", &clause[..*end], &clause[*end..]));
    }
    if let Some((start, _, _)) = words.iter().skip(1).find(|(s, e, w)| is_verb(w, &clause[*s..*e])) {
        return Some(format!("{prefix}{}likely {}", &clause[..*start], &clause[*start..]));
    }
    let first = words.first()?;
    let rest =
        if LEADING_FUNCTION_WORDS.contains(&first.2.as_str()) { decapitalize_first(clause) } else { clause.to_string() };
    Some(format!("{prefix}Reportedly, {rest}"))
}

fn hedge_temporal(body: &str) -> Option<String> {
    let years: Vec<usize> = text::year_tokens(body).iter().map(|t| t.start).collect();
    if !years.is_empty() {
        return Some(qualify_all(body, &years, "around", &["in"], &TEMPORAL_HEDGES));
    }
    let mut sites: Vec<usize> = text::month_matches(body).iter().map(|m| m.0).collect();
    if let Some((start, _, _)) = text::first_century(body) {
        let site = match previous_word(body, start) {
            Some((s, _, w)) if w == "the" => s,
            _ => start,
        };
        sites.push(site);
    }
    if sites.is_empty() {
        return None;
    }
    sites.sort_unstable();
    Some(qualify_all(body, &sites, "around", &["in"], &TEMPORAL_HEDGES))
}

fn hedge_quantitative(body: &str) -> Option<String> {
    let sites: Vec<usize> = text::number_tokens(body).iter().filter(|t| !t.is_year()).map(|t| t.start).collect();
    if sites.is_empty() {
        return None;
    }
    Some(qualify_all(body, &sites, "approximately", &PRECISION_WORDS, &QUANT_HEDGES))
}

fn correlational(c: &causal::Connective, left: &str) -> &'static str {
    match (c.relation, c.form) {
        (Relation::DueTo, _) => "associated with",
        (Relation::Because, _) => "which is associated with the fact that",
        (_, Form::Past) => causal::verb_phrase(Relation::Associated, Form::Past, causal::looks_plural(left)),
        (_, Form::Plural) => "are associated with",
        _ => "is associated with",
    }
}

fn hedge_logical(body: &str) -> Option<String> {
    let found = causal::connectives(body);
    let causal_sites: Vec<&causal::Connective> = found.iter().filter(|c| c.is_causal()).collect();
    if causal_sites.is_empty() {
        return (!found.is_empty()).then(|| body.to_string());
    }
    let mut out = body.to_string();
    for c in causal_sites.into_iter().rev() {
        let left = out[..c.outer_start].trim_end();
        let phrase = correlational(c, left);
        out = if c.relation == Relation::Because {
            let left = left.trim_end_matches(',');
            format!("{left}, {phrase}{}", &out[c.end..])
        } else {
            format!("{}{phrase}{}", &out[..c.outer_start], &out[c.end..])
        };
    }
    Some(out)
}

/// Hedged form of `text` for `kind`. Already-hedged text comes back
/// unchanged; text without a site for the kind is an error.
pub fn hedge(text: &str, kind: ProbeKind) -> Result<String, MitigationError> {
    let (body, terminator) = text::split_terminator(text.trim());
    let hedged = match kind {
        ProbeKind::Factual => hedge_factual(body),
        ProbeKind::Temporal => hedge_temporal(body),
        ProbeKind::Quantitative => hedge_quantitative(body),
        ProbeKind::Logical => hedge_logical(body),
    }
    .ok_or(MitigationError::NoRewriteSite(kind))?;
    Ok(format!("{hedged}{terminator}"))
}

/// Rewrites the statement with the strategy for `kind`.
pub fn mitigate(statement: &Statement, kind: ProbeKind) -> Result<String, MitigationError> {
    if !statement.claim_kinds.contains(&kind) {
        return Err(MitigationError::KindNotApplicable(kind));
    }
    hedge(&statement.text, kind)
}

/// The claim kind whose probes showed the flattest confidence, among kinds
/// with a rewrite site. Ties go to the earlier kind; kinds that were never
/// probed come after all probed ones.
pub fn choose_strategy(statement: &Statement, report: &SensitivityReport) -> Option<ProbeKind> {
    let mut best: Option<(ProbeKind, f64)> = None;
    for &kind in &statement.claim_kinds {
        if hedge(&statement.text, kind).is_err() {
            continue;
        }
        let score = report.kind_sensitivity(kind).unwrap_or(f64::INFINITY);
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((kind, score));
        }
    }
    best.map(|(kind, _)| kind)
}

/// Statement standing for the rewrite; keeps the original id and claim kinds.
pub fn mitigated_statement(original: &Statement, mitigated_text: &str) -> Statement {
    Statement {
        id: original.id.clone(),
        text: mitigated_text.to_string(),
        source_span: original.source_span,
        claim_kinds: original.claim_kinds.clone(),
    }
}

/// Scores the rewrite against its own probes and records the change in p_hall.
pub fn rescore_mitigation(
    original_report: &SensitivityReport,
    original: &Statement,
    mitigated_text: &str,
    strategy: ProbeKind,
    probes: &[Counterfactual],
    backend: &Backend,
    weights: &ScoringWeights,
) -> Result<MitigatedStatement, MitigationError> {
    if !original_report.verdict {
        return Err(MitigationError::NotFlagged);
    }
    let rewritten = mitigated_statement(original, mitigated_text);
    let after = detect_statement(&rewritten, probes, backend, weights)?;
    Ok(MitigatedStatement {
        statement_id: original.id.clone(),
        original_text: original.text.clone(),
        mitigated_text: mitigated_text.to_string(),
        strategy,
        score_before: original_report.p_hall,
        score_after: after.p_hall,
        improvement: original_report.p_hall - after.p_hall,
    })
}
