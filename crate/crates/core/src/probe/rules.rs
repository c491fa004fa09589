//! Deterministic perturbation rules, one per probe kind.

use crate::causal::{self, Relation};
use crate::kind::ProbeKind;
use crate::text::{self, NumberForm};

use super::lexicon::ConfusableLexicon;

/// A rule-produced rewrite and a short description of what changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Rewrite {
    pub text: String,
    pub perturbation: String,
}

const SHIFTS: [i64; 4] = [-1, 1, -2, 2];
const SCALE_FACTORS: [f64; 4] = [0.5, 0.9, 1.1, 2.0];

fn splice(body: &str, start: usize, end: usize, replacement: &str) -> String {
    format!("{}{}{}", &body[..start], replacement, &body[end..])
}

fn pick<T: Copy>(options: &[T], seed: u64) -> T {
    options[(seed % options.len() as u64) as usize]
}

fn factual(body: &str, lexicon: &ConfusableLexicon, seed: u64) -> Option<Rewrite> {
    let m = lexicon.first_match(body)?;
    let original = lexicon.entity(&m);
    let substitute = pick(&lexicon.confusables(&m), seed);
    Some(Rewrite {
        text: splice(body, m.start, m.end, substitute),
        perturbation: format!("entity: {original}→{substitute}"),
    })
}

fn temporal(body: &str, seed: u64) -> Option<Rewrite> {
    let shift = pick(&SHIFTS, seed);
    if let Some(year) = text::number_tokens(body).into_iter().find(text::NumberToken::is_year) {
        let old = year.value as i64;
        let new = old + shift;
        return Some(Rewrite {
            text: splice(body, year.start, year.end, &new.to_string()),
            perturbation: format!("year: {old}→{new}"),
        });
    }
    if let Some(&(start, end, idx)) = text::month_matches(body).first() {
        let new_idx = (idx as i64 + shift).rem_euclid(12) as usize;
        let (old, new) = (text::MONTHS[idx], text::MONTHS[new_idx]);
        return Some(Rewrite { text: splice(body, start, end, new), perturbation: format!("month: {old}→{new}") });
    }
    if let Some((start, end, n)) = text::first_century(body) {
        let shifted = i64::from(n) + shift;
        let new = if shifted >= 1 { shifted } else { i64::from(n) - shift } as u32;
        let phrase = format!("{new}{} century", text::ordinal_suffix(new));
        return Some(Rewrite {
            text: splice(body, start, end, &phrase),
            perturbation: format!("century: {n}{}→{new}{}", text::ordinal_suffix(n), text::ordinal_suffix(new)),
        });
    }
    None
}

fn quantitative(body: &str, seed: u64) -> Option<Rewrite> {
    let token = text::number_tokens(body).into_iter().find(|t| !t.is_year())?;
    let original = &body[token.start..token.end];
    let capitalized = original.chars().next().is_some_and(char::is_uppercase);
    let render = |v: f64| text::render_number(v, token.form, capitalized);
    let is_small_integer = token.value.fract() == 0.0 && token.value <= 10.0;
    let candidates: Vec<f64> = if is_small_integer {
        let (down, up) = (token.value - 1.0, token.value + 1.0);
        let ordered = if seed.is_multiple_of(2) { [down, up] } else { [up, down] };
        ordered.into_iter().filter(|v| *v >= 0.0).collect()
    } else {
        let start = (seed % SCALE_FACTORS.len() as u64) as usize;
        (0..SCALE_FACTORS.len())
            .map(|i| {
                let scaled = token.value * SCALE_FACTORS[(start + i) % SCALE_FACTORS.len()];
                match token.form {
                    NumberForm::Digits { decimals, .. } => {
                        let p = 10f64.powi(decimals as i32);
                        (scaled * p).round() / p
                    }
                    NumberForm::Word => scaled.round(),
                }
            })
            .collect()
    };
    let replacement = candidates
        .into_iter()
        .map(render)
        .find(|r| text::normalize(r) != text::normalize(original))?;
    Some(Rewrite {
        text: splice(body, token.start, token.end, &replacement),
        perturbation: format!("number: {original}→{replacement}"),
    })
}

fn logical(body: &str, lexicon: &ConfusableLexicon) -> Option<Rewrite> {
    causal::connectives(body).into_iter().find_map(|c| {
        let start = text::clause_start(body, c.outer_start);
        let prefix = &body[..start];
        let left = body[start..c.outer_start].trim().trim_end_matches(',').trim();
        let right = body[c.end..].trim().trim_start_matches(',').trim();
        if left.is_empty() || right.is_empty() {
            return None;
        }
        let adverb = body[c.outer_start..c.start].trim();
        let verb = causal::verb_phrase(c.relation, c.form, causal::looks_plural(right));
        let verb = if adverb.is_empty() { verb.to_string() } else { format!("{} {verb}", adverb.to_lowercase()) };
        let object = text::demote_sentence_start(left, lexicon.starts_with_entity(left));
        let subject = text::capitalize_first(right);
        let label = if c.relation == Relation::Associated { "association" } else { "causal" };
        Some(Rewrite {
            text: format!("{prefix}{subject} {verb} {object}"),
            perturbation: format!("{label}: swapped \"{left}\" and \"{right}\""),
        })
    })
}

/// Applies the rule for `kind` to `text`; `None` when the text has no site
/// for that rule. The sentence terminator, if any, is preserved.
pub(crate) fn rewrite(text: &str, kind: ProbeKind, lexicon: &ConfusableLexicon, seed: u64) -> Option<Rewrite> {
    let (body, terminator) = text::split_terminator(text.trim());
    let out = match kind {
        ProbeKind::Factual => factual(body, lexicon, seed),
        ProbeKind::Temporal => temporal(body, seed),
        ProbeKind::Quantitative => quantitative(body, seed),
        ProbeKind::Logical => logical(body, lexicon),
    }?;
    Some(Rewrite { text: format!("{}{terminator}", out.text), ..out })
}
