//! Sensitivity, variance and the hallucination verdict.

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError};
use crate::extract::{Statement, StatementId};
use crate::kind::ProbeKind;
use crate::probe::Counterfactual;

/// Largest possible population variance of values in [0, 1].
pub const MAX_VARIANCE: f64 = 0.25;

const EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ScoringError {
    #[error("counterfactual set is empty")]
    EmptyCounterfactualSet,
    #[error("{name} = {value} is outside [{low}, {high}]")]
    OutOfRange { name: &'static str, value: f64, low: f64, high: f64 },
    #[error("weights must be non-negative and sum to 1 (got {w_sensitivity} + {w_variance})")]
    InvalidWeights { w_sensitivity: f64, w_variance: f64 },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn check_range(name: &'static str, value: f64, low: f64, high: f64) -> Result<(), ScoringError> {
    if value.is_nan() || value < low - EPS || value > high + EPS {
        return Err(ScoringError::OutOfRange { name, value, low, high });
    }
    Ok(())
}

/// Mean absolute gap between the original confidence and each counterfactual's.
pub fn sensitivity(conf_s: f64, conf_cs: &[f64]) -> Result<f64, ScoringError> {
    if conf_cs.is_empty() {
        return Err(ScoringError::EmptyCounterfactualSet);
    }
    check_range("confidence", conf_s, 0.0, 1.0)?;
    for &c in conf_cs {
        check_range("confidence", c, 0.0, 1.0)?;
    }
    let total: f64 = conf_cs.iter().map(|c| (conf_s - c).abs()).sum();
    Ok((total / conf_cs.len() as f64).clamp(0.0, 1.0))
}

/// Population variance of the counterfactual confidences.
pub fn confidence_variance(conf_cs: &[f64]) -> Result<f64, ScoringError> {
    if conf_cs.is_empty() {
        return Err(ScoringError::EmptyCounterfactualSet);
    }
    let n = conf_cs.len() as f64;
    let mean = conf_cs.iter().sum::<f64>() / n;
    let var = conf_cs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    Ok(var.clamp(0.0, MAX_VARIANCE))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringWeights {
    pub w_sensitivity: f64,
    pub w_variance: f64,
    pub threshold: f64,
}

impl Default for ScoringWeights {
    fn default() -> Self {
        ScoringWeights { w_sensitivity: 0.7, w_variance: 0.3, threshold: 0.5 }
    }
}

impl ScoringWeights {
    /// Weights with `w_variance = 1 - w_sensitivity`.
    pub fn new(w_sensitivity: f64, threshold: f64) -> Result<Self, ScoringError> {
        let w = ScoringWeights { w_sensitivity, w_variance: 1.0 - w_sensitivity, threshold };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        let (ws, wv) = (self.w_sensitivity, self.w_variance);
        if !(ws >= 0.0 && wv >= 0.0) || (ws + wv - 1.0).abs() > 1e-9 {
            return Err(ScoringError::InvalidWeights { w_sensitivity: ws, w_variance: wv });
        }
        check_range("threshold", self.threshold, 0.0, 1.0)
    }

    pub fn verdict(&self, p_hall: f64) -> bool {
        p_hall > self.threshold
    }
}

/// Combines the two robustness signals; low sensitivity and low variance both
/// push towards a hallucination.
pub fn hallucination_probability(
    sensitivity: f64,
    variance: f64,
    weights: &ScoringWeights,
) -> Result<f64, ScoringError> {
    check_range("sensitivity", sensitivity, 0.0, 1.0)?;
    check_range("variance", variance, 0.0, MAX_VARIANCE)?;
    let p = weights.w_sensitivity * (1.0 - sensitivity) + weights.w_variance * (1.0 - variance / MAX_VARIANCE);
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub statement_id: StatementId,
    pub conf_original: f64,
    pub conf_counterfactuals: Vec<f64>,
    /// Kind of the probe behind each entry of `conf_counterfactuals`.
    pub probe_kinds: Vec<ProbeKind>,
    pub sensitivity: f64,
    pub variance: f64,
    pub p_hall: f64,
    pub verdict: bool,
    pub threshold_used: f64,
}

impl SensitivityReport {
    pub fn from_confidences(
        statement_id: StatementId,
        conf_original: f64,
        conf_counterfactuals: Vec<f64>,
        probe_kinds: Vec<ProbeKind>,
        weights: &ScoringWeights,
    ) -> Result<Self, ScoringError> {
        let sensitivity = sensitivity(conf_original, &conf_counterfactuals)?;
        let variance = confidence_variance(&conf_counterfactuals)?;
        let p_hall = hallucination_probability(sensitivity, variance, weights)?;
        Ok(SensitivityReport {
            statement_id,
            conf_original,
            conf_counterfactuals,
            probe_kinds,
            sensitivity,
            variance,
            p_hall,
            verdict: weights.verdict(p_hall),
            threshold_used: weights.threshold,
        })
    }

    /// Recomputes the report under different weights from its stored confidences.
    pub fn rescored(&self, weights: &ScoringWeights) -> Result<Self, ScoringError> {
        Self::from_confidences(
            self.statement_id.clone(),
            self.conf_original,
            self.conf_counterfactuals.clone(),
            self.probe_kinds.clone(),
            weights,
        )
    }

    /// Mean gap to the original for the probes of one kind.
    pub fn kind_sensitivity(&self, kind: ProbeKind) -> Option<f64> {
        let gaps: Vec<f64> = self
            .probe_kinds
            .iter()
            .zip(&self.conf_counterfactuals)
            .filter(|(k, _)| **k == kind)
            .map(|(_, c)| (self.conf_original - c).abs())
            .collect();
        (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
    }
}

/// Scores the statement and its probes through the backend and applies the
/// threshold. Confidences are kept in probe order.
pub fn detect_statement(
    statement: &Statement,
    probes: &[Counterfactual],
    backend: &Backend,
    weights: &ScoringWeights,
) -> Result<SensitivityReport, ScoringError> {
    if probes.is_empty() {
        return Err(ScoringError::EmptyCounterfactualSet);
    }
    let mut texts: Vec<&str> = Vec::with_capacity(probes.len() + 1);
    texts.push(&statement.text);
    texts.extend(probes.iter().map(|p| p.text.as_str()));
    let scores = backend.estimate_batch(&texts).into_iter().collect::<Result<Vec<_>, _>>()?;
    let conf_original = scores[0].value;
    let conf_cs: Vec<f64> = scores[1..].iter().map(|s| s.value).collect();
    let kinds = probes.iter().map(|p| p.kind).collect();
    SensitivityReport::from_confidences(statement.id.clone(), conf_original, conf_cs, kinds, weights)
}
