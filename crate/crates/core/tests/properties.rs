mod common;

use cfprobe::eval::{calibrate, predict, ScoredExample};
use cfprobe::probe::ConfusableLexicon;
use cfprobe::scoring::hallucination_probability;
use cfprobe::text::normalize;
use cfprobe::{
    confidence_variance, extract_statements, hedge, perturb_rule_based, sensitivity, ProbeKind, ScoringWeights,
    SensitivityReport, Statement, StatementId,
};
use common::{brute_f1, brute_sensitivity};
use proptest::prelude::*;
use proptest::sample::select;

fn unit() -> impl Strategy<Value = f64> {
    (0u32..=1000).prop_map(|v| f64::from(v) / 1000.0)
}

fn factual() -> impl Strategy<Value = String> {
    let who = select(vec!["Einstein", "Newton", "Darwin", "Mozart", "Tolstoy", "Monet"]);
    let what = select(vec!["the orchard", "a lighthouse", "the old canal", "the harbor"]);
    prop_oneof![
        (who.clone(), select(vec!["described", "praised", "sketched"]), what.clone())
            .prop_map(|(a, v, b)| format!("{a} {v} {b}.")),
        (who, select(vec!["a painter", "a friend of the mayor", "the first visitor"]))
            .prop_map(|(a, b)| format!("{a} was {b}.")),
    ]
}

fn temporal() -> impl Strategy<Value = String> {
    let thing = select(vec!["The bridge", "The museum", "The old mill", "The library"]);
    let verb = select(vec!["opened", "was built", "closed", "was restored"]);
    let month = select(vec!["March", "June", "October"]);
    prop_oneof![
        (thing.clone(), verb.clone(), 1500u32..2030).prop_map(|(t, v, y)| format!("{t} {v} in {y}.")),
        (thing.clone(), verb.clone(), month, 1500u32..2030).prop_map(|(t, v, m, y)| format!("{t} {v} in {m} {y}.")),
        (thing, verb, 12u32..20).prop_map(|(t, v, c)| format!("{t} {v} in the {c}th century.")),
    ]
}

fn quantitative() -> impl Strategy<Value = String> {
    let thing = select(vec!["The tower", "The stadium", "The ship", "The archive"]);
    let unit = select(vec!["steps", "seats", "crew members", "volumes"]);
    prop_oneof![
        (thing.clone(), 2u32..100_000, unit.clone()).prop_map(|(t, n, u)| format!("{t} has {n} {u}.")),
        (thing.clone(), 2u32..1000, unit.clone()).prop_map(|(t, n, u)| format!("{t} has exactly {n} {u}.")),
        (thing, 1u32..500, unit).prop_map(|(t, n, u)| format!("{t} holds {}.{} thousand {u}.", n / 10, n % 10)),
    ]
}

fn logical() -> impl Strategy<Value = String> {
    let cause = select(vec!["Heavy rain", "Smoking", "Poor drainage", "Strong wind", "Dry air"]);
    let link = select(vec!["causes", "leads to", "results in"]);
    let effect = select(vec!["flooding", "lung disease", "cracked roads", "fallen trees", "sore throats"]);
    (cause, link, effect).prop_map(|(c, l, e)| format!("{c} {l} {e}."))
}

fn kind_and_text() -> impl Strategy<Value = (ProbeKind, String)> {
    prop_oneof![
        factual().prop_map(|t| (ProbeKind::Factual, t)),
        temporal().prop_map(|t| (ProbeKind::Temporal, t)),
        quantitative().prop_map(|t| (ProbeKind::Quantitative, t)),
        logical().prop_map(|t| (ProbeKind::Logical, t)),
    ]
}

fn numbers(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_digit() && c != ',' && c != '.')
        .map(|t| t.trim_matches(|c| c == ',' || c == '.'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

proptest! {
    #[test]
    fn sensitivity_is_permutation_invariant(s in unit(), mut cs in prop::collection::vec(unit(), 1..10), seed in any::<u64>()) {
        let a = sensitivity(s, &cs).unwrap();
        let va = confidence_variance(&cs).unwrap();
        let n = cs.len();
        cs.rotate_left((seed as usize) % n);
        cs.reverse();
        prop_assert!((a - sensitivity(s, &cs).unwrap()).abs() < 1e-12);
        prop_assert!((va - confidence_variance(&cs).unwrap()).abs() < 1e-12);
        prop_assert!((a - brute_sensitivity(s, &cs)).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=0.25).contains(&va));
    }

    #[test]
    fn widening_one_gap_never_lowers_sensitivity(s in unit(), cs in prop::collection::vec(unit(), 1..10), i in any::<prop::sample::Index>()) {
        let j = i.index(cs.len());
        let mut wider = cs.clone();
        wider[j] = if cs[j] <= s { 0.0 } else { 1.0 };
        prop_assert!(sensitivity(s, &wider).unwrap() >= sensitivity(s, &cs).unwrap() - 1e-12);
    }

    #[test]
    fn p_hall_decreases_with_sensitivity(a in unit(), b in unit(), v in 0u32..=250, w in 0u32..=10) {
        let weights = ScoringWeights::new(f64::from(w) / 10.0, 0.5).unwrap();
        let var = f64::from(v) / 1000.0;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = hallucination_probability(lo, var, &weights).unwrap();
        let p_hi = hallucination_probability(hi, var, &weights).unwrap();
        prop_assert!(p_hi <= p_lo + 1e-12);
        prop_assert!((0.0..=1.0).contains(&p_lo));
    }

    #[test]
    fn report_recomputes_from_stored_confidences(s in unit(), cs in prop::collection::vec(unit(), 1..8), w in 0u32..=10, t in 0u32..=100) {
        let weights = ScoringWeights::new(f64::from(w) / 10.0, f64::from(t) / 100.0).unwrap();
        let kinds = vec![ProbeKind::Factual; cs.len()];
        let id = StatementId { document: "d".into(), index: 0 };
        let r = SensitivityReport::from_confidences(id, s, cs.clone(), kinds, &weights).unwrap();
        let p = hallucination_probability(r.sensitivity, r.variance, &weights).unwrap();
        prop_assert_eq!(r.p_hall, p);
        prop_assert_eq!(r.verdict, p > weights.threshold);
        prop_assert_eq!(&r.rescored(&weights).unwrap(), &r);
        let json = serde_json::to_string(&r).unwrap();
        prop_assert_eq!(serde_json::from_str::<SensitivityReport>(&json).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn hedging_is_idempotent_and_keeps_values((kind, text) in kind_and_text()) {
        let once = hedge(&text, kind).unwrap();
        prop_assert_ne!(&once, &text);
        prop_assert_eq!(hedge(&once, kind).unwrap(), once.clone());
        for n in numbers(&text) {
            prop_assert!(numbers(&once).contains(&n), "{} lost {} in `{}`", kind, n, once);
        }
    }

    #[test]
    fn numeric_rules_always_change_the_value(text in prop_oneof![temporal(), quantitative()], seed in any::<u64>()) {
        let statement = Statement::standalone("d", 0, &text).unwrap();
        let lexicon = ConfusableLexicon::builtin();
        for kind in [ProbeKind::Temporal, ProbeKind::Quantitative] {
            if let Ok(probe) = perturb_rule_based(&statement, kind, &lexicon, seed) {
                prop_assert_ne!(normalize(&probe.text), normalize(&text));
                prop_assert_ne!(numbers(&probe.text), numbers(&text));
            }
        }
    }

    #[test]
    fn extraction_is_deterministic_and_spans_round_trip(
        parts in prop::collection::vec(prop_oneof![factual(), temporal(), quantitative(), logical()], 1..8),
        seps in prop::collection::vec(select(vec![" ", "  ", "\n", "\n\n"]), 8),
    ) {
        let mut doc = String::new();
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                doc.push_str(seps[i]);
            }
            doc.push_str(p);
        }
        let a = extract_statements(&doc);
        prop_assert_eq!(&a, &extract_statements(&doc));
        prop_assert_eq!(a.len(), parts.len());
        for s in &a {
            prop_assert_eq!(&doc[s.source_span.0..s.source_span.1], s.text.as_str());
        }
    }

    #[test]
    fn calibrate_matches_exhaustive_grid(raw in prop::collection::vec((any::<bool>(), unit(), 0u32..=250), 20)) {
        prop_assume!(raw.iter().any(|r| r.0) && raw.iter().any(|r| !r.0));
        let examples: Vec<ScoredExample> = raw
            .iter()
            .enumerate()
            .map(|(i, &(label, s, v))| ScoredExample { id: i.to_string(), label, signals: Some((s, f64::from(v) / 1000.0)) })
            .collect();
        let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
        let mut best: Option<(f64, u32, u32)> = None;
        for t in 0..=100u32 {
            for w in 0..=10u32 {
                let weights = ScoringWeights { w_sensitivity: f64::from(w) / 10.0, w_variance: 1.0 - f64::from(w) / 10.0, threshold: f64::from(t) / 100.0 };
                let preds: Vec<bool> = examples.iter().map(|e| {
                    let (s, v) = e.signals.unwrap();
                    hallucination_probability(s, v, &weights).unwrap() > weights.threshold
                }).collect();
                let f1 = brute_f1(&preds, &labels);
                let better = match best {
                    None => true,
                    Some((bf, bt, bw)) => f1 > bf + 1e-12 || ((f1 - bf).abs() <= 1e-12 && (t < bt || (t == bt && w > bw))),
                };
                if better {
                    best = Some((f1, t, w));
                }
            }
        }
        let (f1, t, w) = best.unwrap();
        let c = calibrate(&examples).unwrap();
        prop_assert!((c.f1 - f1).abs() < 1e-12);
        prop_assert_eq!(c.weights.threshold, f64::from(t) / 100.0);
        prop_assert_eq!(c.weights.w_sensitivity, f64::from(w) / 10.0);
        prop_assert!((brute_f1(&predict(&examples, &c.weights), &labels) - f1).abs() < 1e-12);
    }
}
