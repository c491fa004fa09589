//! Lexical helpers shared by extraction, probing and mitigation.

use std::sync::LazyLock;

use regex::Regex;

/// Case-folds and collapses runs of whitespace; used for cache keys,
/// deduplication and knowledge-base lookups.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) const TERMINATORS: [char; 3] = ['.', '!', '?'];

/// Splits a trailing run of sentence terminators off `text`.
pub(crate) fn split_terminator(text: &str) -> (&str, &str) {
    let trimmed = text.trim_end();
    let body = trimmed.trim_end_matches(TERMINATORS);
    (body, &trimmed[body.len()..])
}

pub(crate) fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

pub(crate) fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub(crate) fn decapitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Lowercases the first letter unless the leading word looks like an
/// acronym (all caps) or the caller says it is a proper noun.
pub(crate) fn demote_sentence_start(s: &str, proper_noun: bool) -> String {
    if proper_noun {
        return s.to_string();
    }
    let first_word = s.split_whitespace().next().unwrap_or("");
    let letters: Vec<char> = first_word.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return s.to_string();
    }
    decapitalize_first(s)
}

pub(crate) const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

static MONTH_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"\b({})\b", MONTHS.join("|"))).expect("month regex")
});

static TEMPORAL_KEYWORD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(centur(?:y|ies)|eras?|millenni(?:um|a)|decades?|\d{3}0s|\d+(?:st|nd|rd|th)\s+centur(?:y|ies))\b")
        .expect("temporal keyword regex")
});

static CENTURY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(\d{1,2})(st|nd|rd|th)\s+(century)\b").expect("century regex"));

static DIGITS_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?").expect("digits regex")
});

const UNIT_WORDS: [(&str, u64); 20] = [
    ("zero", 0),
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
    ("eleven", 11),
    ("twelve", 12),
    ("thirteen", 13),
    ("fourteen", 14),
    ("fifteen", 15),
    ("sixteen", 16),
    ("seventeen", 17),
    ("eighteen", 18),
    ("nineteen", 19),
];

const TENS_WORDS: [(&str, u64); 8] = [
    ("twenty", 20),
    ("thirty", 30),
    ("forty", 40),
    ("fifty", 50),
    ("sixty", 60),
    ("seventy", 70),
    ("eighty", 80),
    ("ninety", 90),
];

const SCALE_WORDS: [(&str, u64); 5] = [
    ("hundred", 100),
    ("thousand", 1_000),
    ("million", 1_000_000),
    ("billion", 1_000_000_000),
    ("dozen", 12),
];

static NUMBER_WORD_RE: LazyLock<Regex> = LazyLock::new(|| {
    let words: Vec<&str> = UNIT_WORDS
        .iter()
        .chain(TENS_WORDS.iter())
        .chain(SCALE_WORDS.iter())
        .map(|(w, _)| *w)
        .collect();
    let alt = words.join("|");
    Regex::new(&format!(r"(?i)\b(?:{alt})(?:[- ](?:{alt}))*\b")).expect("number word regex")
});

fn word_value(word: &str) -> Option<(u64, bool)> {
    let lower = word.to_ascii_lowercase();
    UNIT_WORDS
        .iter()
        .chain(TENS_WORDS.iter())
        .find(|(w, _)| *w == lower)
        .map(|(_, v)| (*v, false))
        .or_else(|| {
            SCALE_WORDS
                .iter()
                .find(|(w, _)| *w == lower)
                .map(|(_, v)| (*v, true))
        })
}

/// Renders a small integer as an English number word when one exists.
pub(crate) fn number_word(value: u64) -> Option<&'static str> {
    UNIT_WORDS
        .iter()
        .chain(TENS_WORDS.iter())
        .find(|(_, v)| *v == value)
        .map(|(w, _)| *w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NumberForm {
    /// Digits, with the number of decimal places and whether thousands are comma-grouped.
    Digits { decimals: usize, grouped: bool },
    Word,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NumberToken {
    pub start: usize,
    pub end: usize,
    pub value: f64,
    pub form: NumberForm,
}

impl NumberToken {
    pub fn is_year(&self) -> bool {
        matches!(self.form, NumberForm::Digits { decimals: 0, grouped: false })
            && self.end - self.start == 4
            && (1000.0..=2999.0).contains(&self.value)
    }
}

fn digits_bounded(text: &str, start: usize, end: usize) -> bool {
    let bytes = text.as_bytes();
    let before_ok = start == 0 || !is_word_byte(bytes[start - 1]);
    let after_ok = end == bytes.len() || !is_word_byte(bytes[end]);
    before_ok && after_ok
}

/// All numeric tokens (digit runs and spelled-out numbers) in text order.
pub(crate) fn number_tokens(text: &str) -> Vec<NumberToken> {
    let mut out = Vec::new();
    for m in DIGITS_RE.find_iter(text) {
        if !digits_bounded(text, m.start(), m.end()) {
            continue;
        }
        let s = m.as_str();
        let grouped = s.contains(',');
        let decimals = s.split_once('.').map_or(0, |(_, frac)| frac.len());
        let Ok(value) = s.replace(',', "").parse::<f64>() else {
            continue;
        };
        out.push(NumberToken {
            start: m.start(),
            end: m.end(),
            value,
            form: NumberForm::Digits { decimals, grouped },
        });
    }
    for m in NUMBER_WORD_RE.find_iter(text) {
        let mut total = 0u64;
        let mut current = 0u64;
        let mut any_unit = false;
        for part in m.as_str().split(['-', ' ']).filter(|p| !p.is_empty()) {
            let Some((v, scale)) = word_value(part) else { continue };
            if scale {
                let base = if current == 0 { 1 } else { current };
                if v >= 1000 {
                    total += base * v;
                    current = 0;
                } else {
                    current = base * v;
                }
            } else {
                current += v;
            }
            any_unit = true;
        }
        if !any_unit {
            continue;
        }
        out.push(NumberToken {
            start: m.start(),
            end: m.end(),
            value: (total + current) as f64,
            form: NumberForm::Word,
        });
    }
    out.sort_by_key(|t| t.start);
    out
}

pub(crate) fn year_tokens(text: &str) -> Vec<NumberToken> {
    number_tokens(text).into_iter().filter(NumberToken::is_year).collect()
}

/// Month names that plausibly denote a date; a sentence-initial "May" is skipped.
pub(crate) fn month_matches(text: &str) -> Vec<(usize, usize, usize)> {
    MONTH_RE
        .find_iter(text)
        .filter(|m| !(m.as_str() == "May" && text[..m.start()].trim().is_empty()))
        .map(|m| {
            let idx = MONTHS.iter().position(|n| *n == m.as_str()).unwrap_or(0);
            (m.start(), m.end(), idx)
        })
        .collect()
}

pub(crate) fn has_temporal_keyword(text: &str) -> bool {
    TEMPORAL_KEYWORD_RE.is_match(text)
}

/// First "<ordinal> century" phrase: (start, end, century number).
pub(crate) fn first_century(text: &str) -> Option<(usize, usize, u32)> {
    CENTURY_RE.captures(text).and_then(|c| {
        let whole = c.get(0)?;
        let n: u32 = c[1].parse().ok()?;
        Some((whole.start(), whole.end(), n))
    })
}

pub(crate) fn ordinal_suffix(n: u32) -> &'static str {
    match (n % 10, n % 100) {
        (1, 11) | (2, 12) | (3, 13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    }
}

/// Formats `value` the way the original token was written.
pub(crate) fn render_number(value: f64, form: NumberForm, capitalized: bool) -> String {
    match form {
        NumberForm::Word => {
            let rounded = value.round();
            match (rounded >= 0.0).then(|| number_word(rounded as u64)).flatten() {
                Some(w) if capitalized => crate::text::capitalize_first(w),
                Some(w) => w.to_string(),
                None => format_grouped(rounded, 0, rounded >= 1000.0),
            }
        }
        NumberForm::Digits { decimals, grouped } => format_grouped(value, decimals, grouped),
    }
}

fn format_grouped(value: f64, decimals: usize, grouped: bool) -> String {
    let plain = format!("{value:.decimals$}");
    if !grouped {
        return plain;
    }
    let (int_part, frac) = match plain.split_once('.') {
        Some((i, f)) => (i.to_string(), Some(f.to_string())),
        None => (plain.clone(), None),
    };
    let (sign, digits) = match int_part.strip_prefix('-') {
        Some(d) => ("-", d.to_string()),
        None => ("", int_part),
    };
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    match frac {
        Some(f) => format!("{sign}{out}.{f}"),
        None => format!("{sign}{out}"),
    }
}

/// Start of the clause containing byte offset `at`: just past the last
/// `.`, `?`, `!` or `:` that is followed by whitespace, or 0.
pub(crate) fn clause_start(text: &str, at: usize) -> usize {
    let head = &text[..at];
    let bytes = head.as_bytes();
    let cut = (0..bytes.len().saturating_sub(1))
        .rev()
        .find(|&i| matches!(bytes[i], b'.' | b'?' | b'!' | b':') && bytes[i + 1].is_ascii_whitespace());
    match cut {
        Some(i) => {
            let rest = &head[i + 1..];
            i + 1 + (rest.len() - rest.trim_start().len())
        }
        None => 0,
    }
}

/// Word tokens with byte spans (alphanumeric runs, apostrophes and hyphens kept).
pub(crate) fn words(text: &str) -> Vec<(usize, usize)> {
    static WORD_RE: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(r"[\p{L}\p{N}][\p{L}\p{N}'’\-]*").expect("word regex"));
    WORD_RE.find_iter(text).map(|m| (m.start(), m.end())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_folds_case_and_space() {
        assert_eq!(normalize("  A   b\tC "), "a b c");
    }

    #[test]
    fn numbers_and_years() {
        let toks = number_tokens("World War II ended in 1945 after four years and 7,000 km.");
        let values: Vec<f64> = toks.iter().map(|t| t.value).collect();
        assert_eq!(values, vec![1945.0, 4.0, 7000.0]);
        assert!(toks[0].is_year());
        assert!(!toks[2].is_year());
        assert_eq!(toks[1].form, NumberForm::Word);
    }

    #[test]
    fn ordinals_and_decades_are_not_numbers() {
        assert!(number_tokens("the 19th century and the 1990s").is_empty());
        assert!(has_temporal_keyword("the 1990s"));
    }

    #[test]
    fn compound_number_words() {
        let toks = number_tokens("It has twenty-five rooms and two hundred doors.");
        let values: Vec<f64> = toks.iter().map(|t| t.value).collect();
        assert_eq!(values, vec![25.0, 200.0]);
    }

    #[test]
    fn grouped_rendering() {
        let form = NumberForm::Digits { decimals: 0, grouped: true };
        assert_eq!(render_number(3500.0, form, false), "3,500");
        assert_eq!(render_number(1234567.0, form, false), "1,234,567");
        assert_eq!(render_number(3.0, NumberForm::Word, false), "three");
        assert_eq!(render_number(3.0, NumberForm::Word, true), "Three");
        let dec = NumberForm::Digits { decimals: 1, grouped: false };
        assert_eq!(render_number(3.85, dec, false), "3.9");
    }

    #[test]
    fn sentence_initial_may_is_not_a_month() {
        assert!(month_matches("May the force be with you").is_empty());
        assert_eq!(month_matches("It opened in May 1921").len(), 1);
    }

    #[test]
    fn clause_boundaries() {
        let t = "Q: Why? A: Rain causes mud";
        assert_eq!(&t[clause_start(t, t.len())..], "Rain causes mud");
        assert_eq!(clause_start("Rain causes mud", 5), 0);
        assert_eq!(clause_start("Dr.Who", 4), 0);
    }

    #[test]
    fn terminator_split() {
        assert_eq!(split_terminator("Hi there!?"), ("Hi there", "!?"));
        assert_eq!(split_terminator("No end"), ("No end", ""));
    }
}
