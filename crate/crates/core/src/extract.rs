//! Sentence segmentation and claim-kind classification.
//!
//! Segmentation is rule based: a sentence ends at a run of `.`, `!` or `?`
//! followed by whitespace (or a closing quote/bracket and whitespace), or at a
//! blank line. A period after a known abbreviation or a single-letter initial
//! does not end a sentence.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::kind::ProbeKind;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("statement text is empty")]
    EmptyText,
}

/// Document id plus ordinal position of the statement within it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StatementId {
    pub document: String,
    pub index: usize,
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.document, self.index)
    }
}

/// An atomic declarative sentence lifted from model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub text: String,
    /// Byte offsets `(begin, end)` into the source document; `&doc[begin..end] == text`.
    pub source_span: (usize, usize),
    pub claim_kinds: BTreeSet<ProbeKind>,
}

impl Statement {
    /// Builds a statement that stands on its own (no source document), e.g. a
    /// dataset record. Kinds are classified from the text.
    pub fn standalone(document: impl Into<String>, index: usize, text: &str) -> Result<Self, ExtractError> {
        let text = text.trim();
        let claim_kinds = classify_claim(text)?;
        Ok(Statement {
            id: StatementId { document: document.into(), index },
            text: text.to_string(),
            source_span: (0, text.len()),
            claim_kinds,
        })
    }
}

const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e", "u.s", "u.k",
    "u.n", "a.m", "p.m", "no", "inc", "ltd", "co", "corp", "mt", "approx", "fig", "dept", "gen",
    "gov", "sen", "rep", "ph.d", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
    "oct", "nov", "dec", "est", "ca", "cf", "al",
];

const IMPERATIVE_LEADS: &[&str] = &[
    "please", "let", "let's", "consider", "imagine", "remember", "note", "try", "make", "take",
    "give", "tell", "ask", "go", "see", "check", "find", "look", "read", "write", "use", "keep",
    "avoid", "ensure", "click", "do", "don't", "never", "always", "stop", "put", "open", "close",
    "call", "visit", "compare", "list", "describe", "explain", "show",
];

const MIN_TOKENS: usize = 3;

fn ends_with_abbreviation(before: &str) -> bool {
    let token = before
        .rsplit(|c: char| c.is_whitespace() || c == '(' || c == '"' || c == '\'')
        .next()
        .unwrap_or("");
    if token.is_empty() {
        return false;
    }
    let lower = token.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Single-letter initials such as "J. K. Rowling".
    let mut chars = token.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’')
}

/// Raw segments as byte ranges, untrimmed.
fn segment(document: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = document.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            // Blank line (only whitespace between two newlines) is a hard boundary.
            let mut j = i + 1;
            while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                out.push((start, pos));
                start = chars[j].0 + 1;
                i = j + 1;
                continue;
            }
        }
        if text::TERMINATORS.contains(&c) {
            let mut j = i;
            while j < chars.len() && text::TERMINATORS.contains(&chars[j].1) {
                j += 1;
            }
            let single_period = c == '.' && j - i == 1;
            while j < chars.len() && is_closer(chars[j].1) {
                j += 1;
            }
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            let guarded = single_period && ends_with_abbreviation(&document[start..pos]);
            if at_boundary && !guarded {
                let end = if j == chars.len() { document.len() } else { chars[j].0 };
                out.push((start, end));
                start = end;
                i = j;
                continue;
            }
            i = j.max(i + 1);
            continue;
        }
        i += 1;
    }
    if start < document.len() {
        out.push((start, document.len()));
    }
    out
}

fn trimmed_span(document: &str, (begin, end): (usize, usize)) -> Option<(usize, usize)> {
    let slice = &document[begin..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        return None;
    }
    Some((begin + lead, begin + lead + trimmed.len()))
}

fn is_declarative(sentence: &str) -> bool {
    if sentence.ends_with('?') {
        return false;
    }
    let words = text::words(sentence);
    if words.len() < MIN_TOKENS {
        return false;
    }
    let (s, e) = words[0];
    let lead = sentence[s..e].to_lowercase();
    !IMPERATIVE_LEADS.contains(&lead.as_str())
}

/// Extracts declarative statements from `document`, assigning ids from 0 under
/// the document id `"doc"`.
pub fn extract_statements(document: &str) -> Vec<Statement> {
    extract_document("doc", document)
}

/// Extracts declarative statements, tagging each id with `document_id`.
pub fn extract_document(document_id: &str, document: &str) -> Vec<Statement> {
    segment(document)
        .into_iter()
        .filter_map(|span| trimmed_span(document, span))
        .filter(|&(b, e)| is_declarative(&document[b..e]))
        .enumerate()
        .map(|(index, (b, e))| {
            let text = &document[b..e];
            Statement {
                id: StatementId { document: document_id.to_string(), index },
                text: text.to_string(),
                source_span: (b, e),
                claim_kinds: classify_claim(text).expect("non-empty by construction"),
            }
        })
        .collect()
}

static LOGICAL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(causes|cause|leads to|results in|because|due to)\b").expect("logical regex")
});

/// Probe kinds that apply to a statement. `Factual` is always present.
///
/// A year is a temporal marker only; it does not make a statement
/// quantitative on its own.
pub fn classify_claim(statement: &str) -> Result<BTreeSet<ProbeKind>, ExtractError> {
    let statement = statement.trim();
    if statement.is_empty() {
        return Err(ExtractError::EmptyText);
    }
    let mut kinds = BTreeSet::from([ProbeKind::Factual]);
    let numbers = text::number_tokens(statement);
    let has_year = numbers.iter().any(text::NumberToken::is_year);
    if has_year || !text::month_matches(statement).is_empty() || text::has_temporal_keyword(statement) {
        kinds.insert(ProbeKind::Temporal);
    }
    if numbers.iter().any(|n| !n.is_year()) {
        kinds.insert(ProbeKind::Quantitative);
    }
    if LOGICAL_RE.is_match(statement) {
        kinds.insert(ProbeKind::Logical);
    }
    Ok(kinds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProbeKind::*;

    #[test]
    fn two_declaratives() {
        let doc = "Einstein developed the theory of relativity. World War II ended in 1945.";
        let s = extract_statements(doc);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].id.index, 0);
        assert_eq!(s[1].id.index, 1);
        assert_eq!(s[1].text, "World War II ended in 1945.");
    }

    #[test]
    fn interrogative_filtered() {
        assert!(extract_statements("What is the capital of France?").is_empty());
    }

    #[test]
    fn nile_kept_verbatim() {
        let s = extract_statements("The Nile is the longest river at 7,000 km.");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "The Nile is the longest river at 7,000 km.");
    }

    #[test]
    fn empty_and_fragments() {
        assert!(extract_statements("").is_empty());
        assert!(extract_statements("   \n\n ").is_empty());
        assert!(extract_statements("Yes. Of course!").is_empty());
    }

    #[test]
    fn imperatives_filtered() {
        let s = extract_statements("Please check the results. The sky is blue today.");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "The sky is blue today.");
    }

    #[test]
    fn abbreviation_guard() {
        let doc = "Dr. Smith moved to the U.S. in 1990. He later worked in Boston.";
        let s = extract_statements(doc);
        assert_eq!(s.len(), 2, "{s:?}");
        assert_eq!(s[0].text, "Dr. Smith moved to the U.S. in 1990.");
    }

    #[test]
    fn decimals_do_not_split() {
        let s = extract_statements("The value of pi is about 3.14 in most textbooks.");
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn spans_slice_source() {
        let doc = "  First claim is here.\n\nSecond claim without end";
        for st in extract_statements(doc) {
            assert_eq!(&doc[st.source_span.0..st.source_span.1], st.text);
        }
        assert_eq!(extract_statements(doc).len(), 2);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_claim("World War II ended in 1945").unwrap(), BTreeSet::from([Factual, Temporal]));
        assert_eq!(
            classify_claim("The human heart has four chambers").unwrap(),
            BTreeSet::from([Factual, Quantitative])
        );
        assert_eq!(classify_claim("Rain causes wet streets").unwrap(), BTreeSet::from([Factual, Logical]));
        assert_eq!(classify_claim("Paris is in France").unwrap(), BTreeSet::from([Factual]));
        assert_eq!(classify_claim("  "), Err(ExtractError::EmptyText));
    }

    #[test]
    fn classify_other_temporal_markers() {
        assert!(classify_claim("The castle was built in the 12th century").unwrap().contains(&Temporal));
        assert!(classify_claim("The treaty was signed in March").unwrap().contains(&Temporal));
        assert!(!classify_claim("The 12th century castle").unwrap().contains(&Quantitative));
    }
}
