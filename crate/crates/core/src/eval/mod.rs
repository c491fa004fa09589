//! Datasets, metrics, calibration, baselines and the ablation harness.

mod baselines;
mod bootstrap;
mod calibrate;
mod dataset;
mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::extract::{ExtractError, Statement};
use crate::kind::ProbeKind;
use crate::pipeline::{Pipeline, PipelineError, RunConfig};
use crate::scoring::{hallucination_probability, ScoringWeights};

pub use baselines::{
    baseline_self_consistency, baseline_simple_confidence, inconsistency, self_consistency_scores,
    simple_confidence_scores, MAX_STD,
};
pub use bootstrap::{bootstrap_ci, percentile, DEFAULT_ITERATIONS, DEFAULT_LEVEL};
pub use calibrate::{calibrate, predict, Calibration};
pub use dataset::{dataset_to_jsonl, load_dataset, parse_dataset, LabeledExample};
pub use metrics::{
    bin_index, brier_score, calibration_curve, classification_metrics, curve_to_csv, expected_calibration_error,
    f1_from, Classification, CurveBin,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("input lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("confidence {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("bin count must be at least 1")]
    InvalidBins,
    #[error("confidence level {0} must lie strictly between 0 and 1")]
    InvalidLevel(f64),
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("dataset file not found: {0}")]
    MissingFile(String),
    #[error("validation set must contain both classes")]
    SingleClassValidation,
    #[error("run aborted after a backend transport failure: {0}")]
    Aborted(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Detection signals for one labelled example. `signals` holds
/// (sensitivity, variance) and is `None` when no probe could be generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub id: String,
    pub label: bool,
    pub signals: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CounterfactualProbing,
    SimpleConfidence,
    SelfConsistency,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::CounterfactualProbing => "counterfactual-probing",
            Method::SimpleConfidence => "simple-confidence",
            Method::SelfConsistency => "self-consistency",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "counterfactual-probing" | "counterfactual" => Ok(Method::CounterfactualProbing),
            "simple-confidence" => Ok(Method::SimpleConfidence),
            "self-consistency" => Ok(Method::SelfConsistency),
            other => Err(format!(
                "unknown method `{other}` (expected counterfactual-probing, simple-confidence or self-consistency)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSettings {
    pub bins: usize,
    pub bootstrap_iterations: usize,
    pub confidence_level: f64,
    pub self_consistency_samples: u32,
    /// Threshold for the baselines; the detector uses the run weights.
    pub baseline_threshold: f64,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            bins: 10,
            bootstrap_iterations: DEFAULT_ITERATIONS,
            confidence_level: DEFAULT_LEVEL,
            self_consistency_samples: 5,
            baseline_threshold: 0.5,
        }
    }
}

/// Score and prediction for one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: String,
    pub label: bool,
    /// Hallucination score in [0, 1].
    pub score: f64,
    pub prediction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ece: f64,
    pub brier: f64,
    pub ci: BTreeMap<String, (f64, f64)>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy)]
struct PointMetrics {
    c: Classification,
    ece: f64,
    brier: f64,
}

fn point_metrics(outcomes: &[Outcome], bins: usize) -> Result<PointMetrics, EvalError> {
    let preds: Vec<bool> = outcomes.iter().map(|o| o.prediction).collect();
    let labels: Vec<bool> = outcomes.iter().map(|o| o.label).collect();
    let scores: Vec<f64> = outcomes.iter().map(|o| o.score).collect();
    Ok(PointMetrics {
        c: classification_metrics(&preds, &labels)?,
        ece: expected_calibration_error(&scores, &labels, bins)?,
        brier: brier_score(&scores, &labels)?,
    })
}

const METRIC_NAMES: [&str; 6] = ["accuracy", "precision", "recall", "f1", "ece", "brier"];

fn metric_value(m: &PointMetrics, name: &str) -> f64 {
    match name {
        "accuracy" => m.c.accuracy,
        "precision" => m.c.precision,
        "recall" => m.c.recall,
        "f1" => m.c.f1,
        "ece" => m.ece,
        _ => m.brier,
    }
}

/// Point metrics plus bootstrap intervals. Each interval is widened, if
/// needed, to contain its point estimate.
pub fn metrics_report(
    method: &str,
    outcomes: &[Outcome],
    threshold: f64,
    settings: &EvaluationSettings,
    seed: u64,
) -> Result<MetricsReport, EvalError> {
    let point = point_metrics(outcomes, settings.bins)?;
    let mut ci = BTreeMap::new();
    for name in METRIC_NAMES {
        let (low, high) = bootstrap_ci(
            outcomes,
            |sample| point_metrics(sample, settings.bins).map(|m| metric_value(&m, name)).unwrap_or(0.0),
            settings.bootstrap_iterations,
            seed,
            settings.confidence_level,
        )?;
        let p = metric_value(&point, name);
        ci.insert(name.to_string(), (low.min(p), high.max(p)));
    }
    Ok(MetricsReport {
        method: method.to_string(),
        n: outcomes.len(),
        accuracy: point.c.accuracy,
        precision: point.c.precision,
        recall: point.c.recall,
        f1: point.c.f1,
        ece: point.ece,
        brier: point.brier,
        ci,
        threshold,
    })
}

fn statements(examples: &[LabeledExample]) -> Result<Vec<Statement>, EvalError> {
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| Ok(Statement::standalone(e.dataset.clone(), i, &e.text)?))
        .collect()
}

/// Runs detection on every example (one statement each) and keeps the
/// weight-independent signals.
pub fn score_examples(examples: &[LabeledExample], pipeline: &Pipeline) -> Result<Vec<ScoredExample>, EvalError> {
    let report = pipeline.detect_statements("evaluation", &statements(examples)?);
    if report.partial {
        let reason = report.statements.iter().rev().find_map(|s| s.error.clone()).unwrap_or_default();
        return Err(EvalError::Aborted(reason));
    }
    Ok(examples
        .iter()
        .zip(&report.statements)
        .map(|(e, rec)| ScoredExample {
            id: e.id.clone(),
            label: e.label,
            signals: rec.report.as_ref().map(|r| (r.sensitivity, r.variance)),
        })
        .collect())
}

/// Detector outcomes under `weights`; unscored examples get score 0 and a
/// negative prediction.
pub fn probing_outcomes(scored: &[ScoredExample], weights: &ScoringWeights) -> Vec<Outcome> {
    let preds = predict(scored, weights);
    scored
        .iter()
        .zip(preds)
        .map(|(e, prediction)| Outcome {
            id: e.id.clone(),
            label: e.label,
            score: e
                .signals
                .map(|(s, v)| hallucination_probability(s, v, weights).expect("stored signals are in range"))
                .unwrap_or(0.0),
            prediction,
        })
        .collect()
}

fn baseline_outcomes(examples: &[LabeledExample], scores: Vec<f64>, tau: f64) -> Vec<Outcome> {
    examples
        .iter()
        .zip(scores)
        .map(|(e, score)| Outcome { id: e.id.clone(), label: e.label, score, prediction: score > tau })
        .collect()
}

/// Outcomes of one method over a labelled set.
pub fn method_outcomes(
    examples: &[LabeledExample],
    pipeline: &Pipeline,
    method: Method,
    settings: &EvaluationSettings,
) -> Result<Vec<Outcome>, EvalError> {
    let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
    let backend = pipeline.backend();
    let tau = settings.baseline_threshold;
    Ok(match method {
        Method::CounterfactualProbing => {
            probing_outcomes(&score_examples(examples, pipeline)?, &pipeline.config().weights)
        }
        Method::SimpleConfidence => baseline_outcomes(examples, simple_confidence_scores(&texts, backend)?, tau),
        Method::SelfConsistency => baseline_outcomes(
            examples,
            self_consistency_scores(&texts, backend, settings.self_consistency_samples)?,
            tau,
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub seed: u64,
    pub config_digest: String,
    pub report: MetricsReport,
    pub outcomes: Vec<Outcome>,
    pub curve: Vec<CurveBin>,
}

pub fn evaluate(
    examples: &[LabeledExample],
    pipeline: &Pipeline,
    method: Method,
    settings: &EvaluationSettings,
) -> Result<Evaluation, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let outcomes = method_outcomes(examples, pipeline, method, settings)?;
    let threshold = match method {
        Method::CounterfactualProbing => pipeline.config().weights.threshold,
        _ => settings.baseline_threshold,
    };
    let report = metrics_report(method.as_str(), &outcomes, threshold, settings, pipeline.config().seed)?;
    let scores: Vec<f64> = outcomes.iter().map(|o| o.score).collect();
    let labels: Vec<bool> = outcomes.iter().map(|o| o.label).collect();
    let curve = calibration_curve(&scores, &labels, settings.bins)?;
    Ok(Evaluation { seed: pipeline.config().seed, config_digest: pipeline.digest(), report, outcomes, curve })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub disabled_kind: ProbeKind,
    pub f1: f64,
    pub delta: f64,
}

/// Per-run predictions kept so deltas can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub disabled_kind: Option<ProbeKind>,
    pub predictions: Vec<bool>,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub full_f1: f64,
    pub rows: Vec<AblationRow>,
    pub labels: Vec<bool>,
    pub runs: Vec<AblationRun>,
    pub weights: ScoringWeights,
    pub seed: u64,
}

impl AblationReport {
    /// Table rows: the full model first, then one row per disabled kind.
    pub fn table(&self) -> Vec<(String, f64, Option<f64>)> {
        std::iter::once(("Full Model".to_string(), self.full_f1, None))
            .chain(self.rows.iter().map(|r| (format!("No {} Probe", r.disabled_kind.label()), r.f1, Some(r.delta))))
            .collect()
    }
}

/// Detection with all kinds, then with each kind disabled in turn. Backend,
/// seed and weights stay fixed across the five runs.
pub fn run_ablation(examples: &[LabeledExample], pipeline: &Pipeline) -> Result<AblationReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let base = pipeline.config();
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    let run = |disabled: Option<ProbeKind>| -> Result<AblationRun, EvalError> {
        let config = RunConfig { disabled_kinds: disabled.into_iter().collect(), ..base.clone() };
        let p = pipeline.reconfigured(config)?;
        let predictions = predict(&score_examples(examples, &p)?, &base.weights);
        let f1 = classification_metrics(&predictions, &labels)?.f1;
        Ok(AblationRun { disabled_kind: disabled, predictions, f1 })
    };
    let mut runs = vec![run(None)?];
    for kind in ProbeKind::ALL {
        runs.push(run(Some(kind))?);
    }
    let full_f1 = runs[0].f1;
    let rows = runs[1..]
        .iter()
        .map(|r| AblationRow { disabled_kind: r.disabled_kind.expect("ablated run"), f1: r.f1, delta: r.f1 - full_f1 })
        .collect();
    Ok(AblationReport { full_f1, rows, labels, runs, weights: base.weights, seed: base.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Backend, MockKnowledgeBase, MockSource};
    use std::sync::Arc;

    fn example(id: &str, text: &str, label: bool) -> LabeledExample {
        LabeledExample {
            id: id.into(),
            text: text.into(),
            label,
            kind: None,
            domain: String::new(),
            dataset: "t".into(),
        }
    }

    fn pipeline(kb: MockKnowledgeBase) -> Pipeline {
        let config = RunConfig {
            probe_strategy: crate::probe::ProbeStrategy::RuleOnly,
            weights: ScoringWeights { threshold: 0.8, ..Default::default() },
            ..Default::default()
        };
        let backend = Backend::new(Box::new(MockSource::new(kb, 0)), &config.backend).unwrap();
        Pipeline::with_backend(config, Arc::new(backend)).unwrap()
    }

    fn kb() -> MockKnowledgeBase {
        let mut kb = MockKnowledgeBase::new(0.2, 0.0).unwrap();
        kb.insert("World War II ended in 1945.", 0.9).unwrap();
        kb.insert("Rain causes wet streets.", 0.6).unwrap();
        kb.insert("Wet streets cause rain.", 0.6).unwrap();
        kb
    }

    #[test]
    fn evaluation_end_to_end() {
        let examples = vec![
            example("a", "World War II ended in 1945.", false),
            example("b", "Rain causes wet streets.", true),
            example("c", "The sky looks pale today.", false),
        ];
        let p = pipeline(kb());
        let eval = evaluate(&examples, &p, Method::CounterfactualProbing, &EvaluationSettings::default()).unwrap();
        assert_eq!(eval.outcomes.iter().map(|o| o.prediction).collect::<Vec<_>>(), [false, true, false]);
        assert_eq!(eval.report.f1, 1.0);
        let (low, high) = eval.report.ci["f1"];
        assert!(low <= eval.report.f1 && eval.report.f1 <= high);

        let simple = evaluate(&examples, &p, Method::SimpleConfidence, &EvaluationSettings::default()).unwrap();
        assert_eq!(simple.report.method, "simple-confidence");
        assert_eq!(simple.report.recall, 0.0);
    }

    #[test]
    fn ablation_rows_recompute() {
        let examples =
            vec![example("a", "World War II ended in 1945.", false), example("b", "Rain causes wet streets.", true)];
        let report = run_ablation(&examples, &pipeline(kb())).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.table().len(), 5);
        for (row, run) in report.rows.iter().zip(&report.runs[1..]) {
            let f1 = classification_metrics(&run.predictions, &report.labels).unwrap().f1;
            assert_eq!(row.delta, f1 - report.full_f1);
        }
        let temporal = report.rows.iter().find(|r| r.disabled_kind == ProbeKind::Temporal).unwrap();
        assert_eq!(temporal.delta, 0.0);
        let logical = report.rows.iter().find(|r| r.disabled_kind == ProbeKind::Logical).unwrap();
        assert!(logical.delta < 0.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::CounterfactualProbing, Method::SimpleConfidence, Method::SelfConsistency] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("fact-check".parse::<Method>().is_err());
    }
}
