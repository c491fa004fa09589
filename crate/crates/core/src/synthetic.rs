//! Synthetic stand-in corpora and the mock knowledge base that scores them.
//!
//! Every statement carries exactly one probe-able kind, so a kind's probes are
//! the only way to catch its hallucinations. True statements score high and
//! their counterfactuals score low. Hallucinations and all their
//! counterfactuals share one flat score, and hedged rewrites of hallucinations
//! score like true statements.

use std::collections::{BTreeSet, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::MockKnowledgeBase;
use crate::eval::LabeledExample;
use crate::extract::classify_claim;
use crate::kind::ProbeKind;
use crate::mitigation::hedge;
use crate::probe::{rule_variants, ConfusableLexicon};
use crate::text::{normalize, number_word};

pub const TRUE_CONFIDENCE: f64 = 0.9;
pub const FLAT_CONFIDENCE: f64 = 0.6;
pub const UNKNOWN_CONFIDENCE: f64 = 0.2;
pub const JITTER: f64 = 0.02;

/// Run seeds below this bound all reach only counterfactuals stored in the
/// knowledge base.
pub const SEED_COVERAGE: u64 = 16;

const PEOPLE: [&str; 8] = ["physicists", "biologists", "chemists", "inventors", "explorers", "composers", "writers", "painters"];
const VERBS: [&str; 12] = [
    "studied", "admired", "described", "praised", "questioned", "documented", "revised", "championed", "explained",
    "sketched", "defended", "catalogued",
];
const ADJECTIVES: [&str; 15] = [
    "coastal", "ancient", "silent", "northern", "fragile", "luminous", "hidden", "restless", "forgotten", "amber",
    "crystal", "distant", "humble", "curious", "gentle",
];
const PLACES: [&str; 15] = [
    "lighthouse", "orchard", "glacier", "manuscript", "cathedral", "harbor", "meadow", "observatory", "vineyard",
    "fortress", "library", "canal", "monastery", "garden", "bridge",
];
const PARTICIPLES: [&str; 10] =
    ["built", "opened", "restored", "completed", "founded", "abandoned", "renovated", "rebuilt", "dedicated", "expanded"];
const COUNTED: [&str; 10] = ["rooms", "towers", "windows", "gates", "arches", "bells", "columns", "doors", "statues", "books"];
const CAUSES: [&str; 12] = [
    "heavy rain", "poor drainage", "steady wind", "soil erosion", "frequent frost", "dense fog", "rising heat",
    "salt spray", "strong tides", "loose gravel", "acid runoff", "dry air",
];
const EFFECTS: [&str; 12] = [
    "muddy fields", "slow traffic", "cracked roads", "faded paint", "rusted rails", "bent fences", "flooded cellars",
    "brittle leaves", "stalled engines", "blocked gutters", "damp walls", "sore throats",
];
const CONNECTIVES: [&str; 3] = ["causes", "leads to", "results in"];

fn domain(kind: ProbeKind) -> &'static str {
    match kind {
        ProbeKind::Factual => "people",
        ProbeKind::Temporal => "history",
        ProbeKind::Quantitative => "measurement",
        ProbeKind::Logical => "causation",
    }
}

fn question(kind: ProbeKind) -> &'static str {
    match kind {
        ProbeKind::Factual => "Whose work does the record mention?",
        ProbeKind::Temporal => "When did this happen?",
        ProbeKind::Quantitative => "How large is it?",
        ProbeKind::Logical => "What follows from what?",
    }
}

/// Builds examples one at a time, rejecting candidates whose probes or
/// rewrites would collide with anything already scored.
pub struct SyntheticBuilder {
    rng: ChaCha8Rng,
    lexicon: ConfusableLexicon,
    kb: MockKnowledgeBase,
    reserved: HashSet<String>,
}

impl SyntheticBuilder {
    pub fn new(seed: u64, lexicon: ConfusableLexicon) -> Self {
        let kb = MockKnowledgeBase::new(UNKNOWN_CONFIDENCE, JITTER).expect("constants are in range");
        SyntheticBuilder { rng: ChaCha8Rng::seed_from_u64(seed), lexicon, kb, reserved: HashSet::new() }
    }

    fn pick<'a>(&mut self, options: &[&'a str]) -> &'a str {
        options.choose(&mut self.rng).expect("non-empty pool")
    }

    fn number(&mut self) -> String {
        match self.rng.random_range(0..5) {
            0 | 1 => number_word(self.rng.random_range(2..=10)).expect("small number word").to_string(),
            2 | 3 => self.rng.random_range(11..1000).to_string(),
            _ => {
                let n: u32 = self.rng.random_range(10..100) * 100;
                format!("{},{:03}", n / 1000, n % 1000)
            }
        }
    }

    fn candidate(&mut self, kind: ProbeKind) -> String {
        match kind {
            ProbeKind::Factual => {
                let category = self.pick(&PEOPLE);
                let names: Vec<String> = self
                    .lexicon
                    .categories()
                    .iter()
                    .find(|c| c.name == category)
                    .map(|c| c.entities.clone())
                    .unwrap_or_default();
                let person = names.choose(&mut self.rng).cloned().unwrap_or_else(|| "Einstein".into());
                let (verb, adj, place) = (self.pick(&VERBS), self.pick(&ADJECTIVES), self.pick(&PLACES));
                format!("{person} {verb} the {adj} {place}.")
            }
            ProbeKind::Temporal => {
                let (adj, place, part) = (self.pick(&ADJECTIVES), self.pick(&PLACES), self.pick(&PARTICIPLES));
                let year = self.rng.random_range(1700..2000);
                format!("The {adj} {place} was {part} in {year}.")
            }
            ProbeKind::Quantitative => {
                let (adj, place, counted) = (self.pick(&ADJECTIVES), self.pick(&PLACES), self.pick(&COUNTED));
                let n = self.number();
                format!("The {adj} {place} has {n} {counted}.")
            }
            ProbeKind::Logical => {
                let (cause, conn, effect) = (self.pick(&CAUSES), self.pick(&CONNECTIVES), self.pick(&EFFECTS));
                let mut chars = cause.chars();
                let first = chars.next().expect("non-empty").to_uppercase().collect::<String>();
                format!("{first}{} {conn} {effect}.", chars.as_str())
            }
        }
    }

    fn variants(&self, text: &str, kinds: &BTreeSet<ProbeKind>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for &kind in kinds {
            for base in 0..SEED_COVERAGE {
                out.extend(rule_variants(text, kind, &self.lexicon, base));
            }
        }
        out
    }

    fn hedges(text: &str, kinds: &BTreeSet<ProbeKind>) -> BTreeSet<String> {
        kinds.iter().filter_map(|&k| hedge(text, k).ok()).filter(|h| h != text).collect()
    }

    /// Draws candidates until one passes every check.
    fn next_text(&mut self, kind: ProbeKind, qa: bool) -> String {
        let expected: BTreeSet<ProbeKind> = [ProbeKind::Factual, kind].into_iter().collect();
        loop {
            let answer = self.candidate(kind);
            let text = if qa { format!("Q: {} A: {answer}", question(kind)) } else { answer };
            if classify_claim(&text).ok().as_ref() != Some(&expected) {
                continue;
            }
            let has_entity = self.lexicon.first_match(&text).is_some();
            if has_entity != (kind == ProbeKind::Factual) {
                continue;
            }
            let variants = self.variants(&text, &expected);
            let hedged = Self::hedges(&text, &expected);
            if variants.is_empty() || hedge(&text, kind).is_err() {
                continue;
            }
            let mut touched: Vec<String> = vec![normalize(&text)];
            touched.extend(variants.iter().map(|v| normalize(v)));
            for h in &hedged {
                touched.push(normalize(h));
                touched.extend(self.variants(h, &expected).iter().map(|v| normalize(v)));
            }
            if touched.iter().any(|t| self.reserved.contains(t)) {
                continue;
            }
            self.reserved.extend(touched);
            return text;
        }
    }

    /// One labelled example of the given kind; the knowledge base is updated
    /// to match its label.
    pub fn example(&mut self, id: String, dataset: &str, kind: ProbeKind, hallucination: bool, qa: bool) -> LabeledExample {
        let text = self.next_text(kind, qa);
        let kinds: BTreeSet<ProbeKind> = [ProbeKind::Factual, kind].into_iter().collect();
        if hallucination {
            self.kb.insert(&text, FLAT_CONFIDENCE).expect("constant in range");
            for v in self.variants(&text, &kinds) {
                self.kb.insert(&v, FLAT_CONFIDENCE).expect("constant in range");
            }
            for h in Self::hedges(&text, &kinds) {
                self.kb.insert(&h, TRUE_CONFIDENCE).expect("constant in range");
            }
        } else {
            self.kb.insert(&text, TRUE_CONFIDENCE).expect("constant in range");
        }
        LabeledExample {
            id,
            text,
            label: hallucination,
            kind: Some(kind),
            domain: domain(kind).to_string(),
            dataset: dataset.to_string(),
        }
    }

    /// `n` examples cycling through the kinds; labels alternate in blocks of
    /// four unless `all_hallucinations` is set.
    pub fn corpus(&mut self, dataset: &str, n: usize, all_hallucinations: bool, qa: bool) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| {
                let kind = ProbeKind::ALL[i % 4];
                let label = all_hallucinations || (i / 4) % 2 == 1;
                self.example(format!("{dataset}-{i:03}"), dataset, kind, label, qa)
            })
            .collect()
    }

    pub fn knowledge_base(&self) -> &MockKnowledgeBase {
        &self.kb
    }

    pub fn finish(self) -> MockKnowledgeBase {
        self.kb
    }
}

/// The three shipped corpora and their knowledge base.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub truthfulqa: Vec<LabeledExample>,
    pub factual: Vec<LabeledExample>,
    pub hallucinations: Vec<LabeledExample>,
    pub kb: MockKnowledgeBase,
}

pub const TRUTHFULQA_NAME: &str = "truthfulqa_subset";
pub const FACTUAL_NAME: &str = "factual_statements";
pub const HALLUCINATIONS_NAME: &str = "hallucination_cases";

/// 100 question-answer pairs, 200 statements and 50 hallucinations.
pub fn standard_corpus(seed: u64) -> SyntheticCorpus {
    let mut b = SyntheticBuilder::new(seed, ConfusableLexicon::builtin());
    let truthfulqa = b.corpus(TRUTHFULQA_NAME, 100, false, true);
    let factual = b.corpus(FACTUAL_NAME, 200, false, false);
    let hallucinations = b.corpus(HALLUCINATIONS_NAME, 50, true, false);
    SyntheticCorpus { truthfulqa, factual, hallucinations, kb: b.finish() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_corpus_is_balanced_and_isolated() {
        let mut b = SyntheticBuilder::new(1, ConfusableLexicon::builtin());
        let examples = b.corpus("t", 16, false, false);
        assert_eq!(examples.iter().filter(|e| e.label).count(), 8);
        let lex = ConfusableLexicon::builtin();
        for e in &examples {
            let kind = e.kind.unwrap();
            let kinds = classify_claim(&e.text).unwrap();
            assert_eq!(kinds.len(), if kind == ProbeKind::Factual { 1 } else { 2 }, "{}", e.text);
            assert_eq!(lex.first_match(&e.text).is_some(), kind == ProbeKind::Factual);
        }
        let texts: HashSet<&str> = examples.iter().map(|e| e.text.as_str()).collect();
        assert_eq!(texts.len(), 16);
    }

    #[test]
    fn knowledge_base_matches_labels() {
        let mut b = SyntheticBuilder::new(2, ConfusableLexicon::builtin());
        let examples = b.corpus("t", 8, false, true);
        let kb = b.knowledge_base();
        for e in &examples {
            let expected = if e.label { FLAT_CONFIDENCE } else { TRUE_CONFIDENCE };
            assert_eq!(kb.base_confidence(&e.text), expected);
            assert!(e.text.starts_with("Q: "));
        }
    }

    #[test]
    fn deterministic() {
        let a = SyntheticBuilder::new(5, ConfusableLexicon::builtin()).corpus("t", 12, false, false);
        let b = SyntheticBuilder::new(5, ConfusableLexicon::builtin()).corpus("t", 12, false, false);
        assert_eq!(a, b);
    }
}
