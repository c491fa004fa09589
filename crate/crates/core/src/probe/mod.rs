//! Counterfactual probe generation.
//!
//! Probes come from deterministic rewrite rules, from a backend prompted with
//! few-shot templates, or from rules first with the backend filling the
//! remaining slots.

mod lexicon;
mod rules;
mod template;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, GenerationRequest};
use crate::extract::{Statement, StatementId};
use crate::kind::ProbeKind;
use crate::text::normalize;

pub use lexicon::{Category, ConfusableLexicon, EntityMatch, LexiconError};
pub use template::{render_probe_prompt, ProbeTemplate, TemplateError, TemplateSet, PLACEHOLDER};

/// Attempts per kind before the kind counts as exhausted.
pub const MAX_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOrigin {
    RuleBased,
    ModelGenerated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub id: String,
    pub statement_id: StatementId,
    pub kind: ProbeKind,
    pub text: String,
    pub perturbation: String,
    pub origin: ProbeOrigin,
}

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("no {0} perturbation site in statement")]
    NoPerturbationSite(ProbeKind),
    #[error("{0} is not among the statement's claim kinds")]
    KindNotApplicable(ProbeKind),
    #[error("probe count must be at least 1")]
    ZeroProbes,
    #[error("strategy {0:?} needs a backend")]
    MissingBackend(ProbeStrategy),
    #[error("no probe template for {0}")]
    MissingTemplate(ProbeKind),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStrategy {
    RuleOnly,
    ModelOnly,
    #[default]
    RuleThenModel,
}

impl ProbeStrategy {
    pub fn uses_rules(self) -> bool {
        self != ProbeStrategy::ModelOnly
    }

    pub fn uses_model(self) -> bool {
        self != ProbeStrategy::RuleOnly
    }
}

impl std::str::FromStr for ProbeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "rule_only" => Ok(ProbeStrategy::RuleOnly),
            "model_only" => Ok(ProbeStrategy::ModelOnly),
            "rule_then_model" => Ok(ProbeStrategy::RuleThenModel),
            other => Err(format!("unknown probe strategy `{other}`")),
        }
    }
}

/// Probes for one statement. `exhausted` is set when fewer than the requested
/// number could be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub probes: Vec<Counterfactual>,
    pub exhausted: bool,
}

/// Applies the rule for `kind` to the statement.
pub fn perturb_rule_based(
    statement: &Statement,
    kind: ProbeKind,
    lexicon: &ConfusableLexicon,
    seed: u64,
) -> Result<Counterfactual, ProbeError> {
    if !statement.claim_kinds.contains(&kind) {
        return Err(ProbeError::KindNotApplicable(kind));
    }
    let rewrite = rules::rewrite(&statement.text, kind, lexicon, seed)
        .filter(|r| normalize(&r.text) != normalize(&statement.text))
        .ok_or(ProbeError::NoPerturbationSite(kind))?;
    Ok(Counterfactual {
        id: format!("{}/p0", statement.id),
        statement_id: statement.id.clone(),
        kind,
        text: rewrite.text,
        perturbation: rewrite.perturbation,
        origin: ProbeOrigin::RuleBased,
    })
}

/// Every distinct rule output for `text` and `kind` that probe generation
/// starting at `seed` can reach.
pub fn rule_variants(text: &str, kind: ProbeKind, lexicon: &ConfusableLexicon, seed: u64) -> Vec<String> {
    let mut seen = HashSet::new();
    (0..MAX_ATTEMPTS)
        .filter_map(|a| rules::rewrite(text, kind, lexicon, seed.wrapping_add(a)))
        .map(|r| r.text)
        .filter(|t| normalize(t) != normalize(text) && seen.insert(normalize(t)))
        .collect()
}

/// Probe generator holding the lexicon, templates and any disabled kinds.
#[derive(Debug, Clone, Default)]
pub struct ProbeGenerator {
    pub lexicon: ConfusableLexicon,
    pub templates: TemplateSet,
    pub disabled: BTreeSet<ProbeKind>,
}

struct Collector<'a> {
    statement: &'a Statement,
    seen: HashSet<String>,
    probes: Vec<Counterfactual>,
}

impl Collector<'_> {
    fn accepts(&self, text: &str) -> bool {
        let key = normalize(text);
        !key.is_empty() && key != normalize(&self.statement.text) && !self.seen.contains(&key)
    }

    fn push(&mut self, kind: ProbeKind, text: String, perturbation: String, origin: ProbeOrigin) {
        self.seen.insert(normalize(&text));
        self.probes.push(Counterfactual {
            id: format!("{}/p{}", self.statement.id, self.probes.len()),
            statement_id: self.statement.id.clone(),
            kind,
            text,
            perturbation,
            origin,
        });
    }
}

/// Fills slots by cycling over `kinds`; `attempt` yields a fresh candidate
/// for a kind or `None` once that kind is spent.
fn round_robin<F>(kinds: &[ProbeKind], k: usize, collector: &mut Collector<'_>, mut attempt: F) -> Result<(), ProbeError>
where
    F: FnMut(&Collector<'_>, ProbeKind) -> Result<Option<(String, String)>, ProbeError>,
{
    let mut active = kinds.to_vec();
    let mut cursor = 0;
    while collector.probes.len() < k && !active.is_empty() {
        let idx = cursor % active.len();
        let kind = active[idx];
        match attempt(collector, kind)? {
            Some((text, perturbation)) => {
                collector.push(kind, text, perturbation, ProbeOrigin::RuleBased);
                cursor = idx + 1;
            }
            None => {
                active.remove(idx);
                cursor = idx;
            }
        }
    }
    Ok(())
}

impl ProbeGenerator {
    pub fn new(lexicon: ConfusableLexicon, templates: TemplateSet) -> Self {
        ProbeGenerator { lexicon, templates, disabled: BTreeSet::new() }
    }

    pub fn with_disabled(mut self, disabled: impl IntoIterator<Item = ProbeKind>) -> Self {
        self.disabled = disabled.into_iter().collect();
        self
    }

    /// Claim kinds of the statement that are not disabled, in enum order.
    pub fn enabled_kinds(&self, statement: &Statement) -> Vec<ProbeKind> {
        statement.claim_kinds.iter().copied().filter(|k| !self.disabled.contains(k)).collect()
    }

    /// Up to `k` probes, cycling over the enabled claim kinds in enum order.
    pub fn generate(
        &self,
        statement: &Statement,
        k: usize,
        strategy: ProbeStrategy,
        backend: Option<&Backend>,
        seed: u64,
    ) -> Result<ProbeSet, ProbeError> {
        if k == 0 {
            return Err(ProbeError::ZeroProbes);
        }
        if strategy.uses_model() && backend.is_none() {
            return Err(ProbeError::MissingBackend(strategy));
        }
        let kinds = self.enabled_kinds(statement);
        let mut collector = Collector { statement, seen: HashSet::new(), probes: Vec::new() };

        if strategy.uses_rules() {
            let mut attempts = [0u64; 4];
            round_robin(&kinds, k, &mut collector, |c, kind| {
                let n = &mut attempts[kind as usize];
                while *n < MAX_ATTEMPTS {
                    let variant_seed = seed.wrapping_add(*n);
                    *n += 1;
                    match rules::rewrite(&statement.text, kind, &self.lexicon, variant_seed) {
                        None => return Ok(None),
                        Some(r) if c.accepts(&r.text) => return Ok(Some((r.text, r.perturbation))),
                        Some(_) => {}
                    }
                }
                Ok(None)
            })?;
        }

        if let (true, Some(backend)) = (strategy.uses_model(), backend) {
            let before = collector.probes.len();
            let mut variants = [0u32; 4];
            round_robin(&kinds, k, &mut collector, |c, kind| {
                let template = self.templates.get(kind).ok_or(ProbeError::MissingTemplate(kind))?;
                template.require_few_shots()?;
                let prompt = render_probe_prompt(template, &statement.text)?;
                let n = &mut variants[kind as usize];
                while u64::from(*n) < MAX_ATTEMPTS {
                    let request = GenerationRequest { statement: &statement.text, kind, prompt: &prompt, variant: *n };
                    *n += 1;
                    match backend.generate(&request)? {
                        None => return Ok(None),
                        Some(text) if c.accepts(&text) => {
                            return Ok(Some((text, format!("model: {} rewrite", kind.as_str()))));
                        }
                        Some(_) => {}
                    }
                }
                Ok(None)
            })?;
            for probe in &mut collector.probes[before..] {
                probe.origin = ProbeOrigin::ModelGenerated;
            }
        }

        let exhausted = collector.probes.len() < k;
        Ok(ProbeSet { probes: collector.probes, exhausted })
    }
}

/// [`ProbeGenerator::generate`] with the bundled lexicon and templates.
pub fn generate_probes(
    statement: &Statement,
    k: usize,
    strategy: ProbeStrategy,
    backend: Option<&Backend>,
    seed: u64,
) -> Result<ProbeSet, ProbeError> {
    ProbeGenerator::default().generate(statement, k, strategy, backend, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendConfig, MockKnowledgeBase, MockSource};

    fn stmt(text: &str) -> Statement {
        Statement::standalone("doc", 0, text).unwrap()
    }

    fn rule_texts(text: &str, k: usize) -> Vec<String> {
        generate_probes(&stmt(text), k, ProbeStrategy::RuleOnly, None, 0)
            .unwrap()
            .probes
            .into_iter()
            .map(|p| p.text)
            .collect()
    }

    #[test]
    fn worked_rule_examples() {
        let lex = ConfusableLexicon::builtin();
        let cases = [
            ("Einstein developed the theory of relativity", ProbeKind::Factual, "Newton developed the theory of relativity"),
            ("World War II ended in 1945", ProbeKind::Temporal, "World War II ended in 1944"),
            ("The human heart has four chambers", ProbeKind::Quantitative, "The human heart has three chambers"),
            ("Rain causes wet streets", ProbeKind::Logical, "Wet streets cause rain"),
        ];
        for (text, kind, expected) in cases {
            let cf = perturb_rule_based(&stmt(text), kind, &lex, 0).unwrap();
            assert_eq!(cf.text, expected);
            assert!(!cf.perturbation.is_empty());
        }
    }

    #[test]
    fn wwii_mixes_factual_and_temporal() {
        let set = generate_probes(&stmt("World War II ended in 1945"), 4, ProbeStrategy::RuleOnly, None, 0).unwrap();
        assert_eq!(set.probes.len(), 4);
        assert!(!set.exhausted);
        let kinds: Vec<ProbeKind> = set.probes.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, [ProbeKind::Factual, ProbeKind::Temporal, ProbeKind::Factual, ProbeKind::Temporal]);
        let distinct: HashSet<String> = set.probes.iter().map(|p| normalize(&p.text)).collect();
        assert_eq!(distinct.len(), 4);
        assert_eq!(set.probes[3].id, "doc:0/p3");
    }

    #[test]
    fn single_kind_may_run_short() {
        let texts = rule_texts("Venus is bright", 20);
        assert!(!texts.is_empty() && texts.len() < 20);
        let set = generate_probes(&stmt("Venus is bright"), 20, ProbeStrategy::RuleOnly, None, 0).unwrap();
        assert!(set.exhausted);
        assert!(set.probes.iter().all(|p| p.kind == ProbeKind::Factual));
    }

    #[test]
    fn k_one_gives_one() {
        assert_eq!(rule_texts("World War II ended in 1945", 1).len(), 1);
    }

    #[test]
    fn inapplicable_kind_and_missing_site() {
        let lex = ConfusableLexicon::builtin();
        let s = stmt("The sky looks pale today");
        assert!(matches!(
            perturb_rule_based(&s, ProbeKind::Temporal, &lex, 0),
            Err(ProbeError::KindNotApplicable(_))
        ));
        assert!(matches!(
            perturb_rule_based(&s, ProbeKind::Factual, &lex, 0),
            Err(ProbeError::NoPerturbationSite(_))
        ));
    }

    #[test]
    fn disabled_kinds_are_skipped() {
        let generator = ProbeGenerator::default().with_disabled([ProbeKind::Factual]);
        let set = generator.generate(&stmt("World War II ended in 1945"), 4, ProbeStrategy::RuleOnly, None, 0).unwrap();
        assert!(set.probes.iter().all(|p| p.kind == ProbeKind::Temporal));
    }

    #[test]
    fn model_strategy_requires_backend() {
        assert!(matches!(
            generate_probes(&stmt("Rain causes wet streets"), 2, ProbeStrategy::RuleThenModel, None, 0),
            Err(ProbeError::MissingBackend(_))
        ));
    }

    #[test]
    fn model_fills_remaining_slots() {
        let mut kb = MockKnowledgeBase::default();
        kb.insert_counterfactual("Venus is bright", ProbeKind::Factual, "Venus is dim");
        kb.insert_counterfactual("Venus is bright", ProbeKind::Factual, "Venus is dim");
        kb.insert_counterfactual("Venus is bright", ProbeKind::Factual, "Venus is invisible");
        let backend = Backend::new(Box::new(MockSource::new(kb, 0)), &BackendConfig::default()).unwrap();
        let s = stmt("Venus is bright");
        let rule_count = rule_texts("Venus is bright", 50).len();
        let set = generate_probes(&s, rule_count + 2, ProbeStrategy::RuleThenModel, Some(&backend), 0).unwrap();
        assert_eq!(set.probes.len(), rule_count + 2);
        assert!(!set.exhausted);
        let model: Vec<&str> = set
            .probes
            .iter()
            .filter(|p| p.origin == ProbeOrigin::ModelGenerated)
            .map(|p| p.text.as_str())
            .collect();
        assert_eq!(model, ["Venus is dim", "Venus is invisible"]);

        let only = generate_probes(&s, 4, ProbeStrategy::ModelOnly, Some(&backend), 0).unwrap();
        assert_eq!(only.probes.len(), 2);
        assert!(only.exhausted);
    }

    #[test]
    fn rule_variants_cover_generation() {
        let lex = ConfusableLexicon::builtin();
        let text = "World War II ended in 1945";
        let mut reachable: HashSet<String> = HashSet::new();
        for kind in [ProbeKind::Factual, ProbeKind::Temporal] {
            reachable.extend(rule_variants(text, kind, &lex, 5));
        }
        for k in 1..=10 {
            for p in generate_probes(&stmt(text), k, ProbeStrategy::RuleOnly, None, 5).unwrap().probes {
                assert!(reachable.contains(&p.text), "{}", p.text);
            }
        }
    }
}
