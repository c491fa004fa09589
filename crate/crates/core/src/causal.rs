//! Causal and correlational connectives, shared by logical probes and the
//! logical hedging rewrite.

use std::sync::LazyLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Relation {
    Cause,
    LeadTo,
    ResultIn,
    Because,
    DueTo,
    /// The hedged, correlational form produced by mitigation.
    Associated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Form {
    Singular,
    Plural,
    Past,
    Invariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Connective {
    /// Start including a leading intensifier such as "directly".
    pub outer_start: usize,
    pub start: usize,
    pub end: usize,
    pub relation: Relation,
    pub form: Form,
}

impl Connective {
    pub fn is_causal(&self) -> bool {
        self.relation != Relation::Associated
    }
}

static CONNECTIVE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:(?:directly|always|necessarily|inevitably)\s+)?(causes|cause|caused|leads\s+to|lead\s+to|led\s+to|results\s+in|result\s+in|resulted\s+in|because|due\s+to|(?:is|are|was|were)\s+associated\s+with)\b",
    )
    .expect("connective regex")
});

fn classify(word: &str) -> (Relation, Form) {
    let lower = word.to_lowercase();
    let first = lower.split_whitespace().next().unwrap_or("");
    match first {
        "causes" => (Relation::Cause, Form::Singular),
        "cause" => (Relation::Cause, Form::Plural),
        "caused" => (Relation::Cause, Form::Past),
        "leads" => (Relation::LeadTo, Form::Singular),
        "lead" => (Relation::LeadTo, Form::Plural),
        "led" => (Relation::LeadTo, Form::Past),
        "results" => (Relation::ResultIn, Form::Singular),
        "result" => (Relation::ResultIn, Form::Plural),
        "resulted" => (Relation::ResultIn, Form::Past),
        "because" => (Relation::Because, Form::Invariant),
        "due" => (Relation::DueTo, Form::Invariant),
        "is" => (Relation::Associated, Form::Singular),
        "are" => (Relation::Associated, Form::Plural),
        // "was"/"were": number is re-derived from the subject when rendering.
        _ => (Relation::Associated, Form::Past),
    }
}

const DETERMINERS: [&str; 10] = ["the", "a", "an", "this", "that", "its", "their", "his", "her", "main"];

fn follows_determiner(text: &str, start: usize) -> bool {
    let prev = text[..start].split_whitespace().last().unwrap_or("").to_lowercase();
    DETERMINERS.contains(&prev.as_str())
}

/// Every connective in `text`, left to right. Noun uses such as "the cause
/// of" are skipped.
pub(crate) fn connectives(text: &str) -> Vec<Connective> {
    CONNECTIVE_RE
        .captures_iter(text)
        .filter(|c| !follows_determiner(text, c.get(0).expect("match").start()))
        .map(|c| {
            let whole = c.get(0).expect("match");
            let core = c.get(1).expect("core group");
            let (relation, form) = classify(core.as_str());
            Connective { outer_start: whole.start(), start: core.start(), end: core.end(), relation, form }
        })
        .collect()
}

const PREPOSITIONS: [&str; 10] = ["in", "of", "on", "at", "for", "from", "with", "near", "during", "across"];

/// Crude number agreement: the phrase is cut at its first preposition and
/// treated as plural when the last remaining word ends in a plural "s".
pub(crate) fn looks_plural(noun_phrase: &str) -> bool {
    let last = noun_phrase
        .split_whitespace()
        .take_while(|w| !PREPOSITIONS.contains(&w.to_lowercase().as_str()))
        .last()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    last.len() > 2
        && last.ends_with('s')
        && !["ss", "us", "is"].iter().any(|suffix| last.ends_with(suffix))
}

/// Verb phrase for `relation`, agreeing with a subject of the given number.
pub(crate) fn verb_phrase(relation: Relation, form: Form, plural_subject: bool) -> &'static str {
    let past = form == Form::Past;
    match (relation, past, plural_subject) {
        (Relation::Cause, true, _) => "caused",
        (Relation::Cause, false, true) => "cause",
        (Relation::Cause, false, false) => "causes",
        (Relation::LeadTo, true, _) => "led to",
        (Relation::LeadTo, false, true) => "lead to",
        (Relation::LeadTo, false, false) => "leads to",
        (Relation::ResultIn, true, _) => "resulted in",
        (Relation::ResultIn, false, true) => "result in",
        (Relation::ResultIn, false, false) => "results in",
        (Relation::Because, ..) => "because",
        (Relation::DueTo, ..) => "due to",
        (Relation::Associated, true, true) => "were associated with",
        (Relation::Associated, true, false) => "was associated with",
        (Relation::Associated, false, true) => "are associated with",
        (Relation::Associated, false, false) => "is associated with",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_connectives() {
        let c = connectives("Vaccines directly cause herd immunity");
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].relation, Relation::Cause);
        assert_eq!(c[0].form, Form::Plural);
        assert_eq!(c[0].outer_start, 9);
        assert_eq!(c[0].start, 18);
        assert!(connectives("Causeway bridges are long").is_empty());
        assert!(connectives("The cause of the fire was unknown").is_empty());
    }

    #[test]
    fn associated_forms() {
        let c = connectives("Rain is associated with wet streets");
        assert_eq!(c[0].relation, Relation::Associated);
        assert!(!c[0].is_causal());
    }

    #[test]
    fn plurality() {
        assert!(looks_plural("wet streets"));
        assert!(!looks_plural("rain"));
        assert!(!looks_plural("the virus"));
        assert!(!looks_plural("glass"));
        assert!(!looks_plural("flooding in low-lying towns"));
        assert!(looks_plural("storms over the hills"));
    }
}
