use serde::{Deserialize, Serialize};

use crate::scoring::{hallucination_probability, ScoringWeights};

use super::metrics::classification_metrics;
use super::{EvalError, ScoredExample};

const F1_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub weights: ScoringWeights,
    pub f1: f64,
}

/// Predictions for every example under `weights`; unscored examples are
/// negative.
pub fn predict(examples: &[ScoredExample], weights: &ScoringWeights) -> Vec<bool> {
    examples
        .iter()
        .map(|e| match e.signals {
            Some((s, v)) => {
                weights.verdict(hallucination_probability(s, v, weights).expect("stored signals are in range"))
            }
            None => false,
        })
        .collect()
}

/// Grid search over the threshold (steps of 0.01) and the sensitivity weight
/// (steps of 0.1) for the best F1. Ties keep the smaller threshold, then the
/// larger sensitivity weight. F1 values within `F1_TIE` count as ties, since
/// equal ratios from different counts can round differently.
pub fn calibrate(validation: &[ScoredExample]) -> Result<Calibration, EvalError> {
    if validation.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let labels: Vec<bool> = validation.iter().map(|e| e.label).collect();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(EvalError::SingleClassValidation);
    }
    let mut best: Option<Calibration> = None;
    for t in 0..=100u32 {
        for w in (0..=10u32).rev() {
            let w_sensitivity = f64::from(w) / 10.0;
            let weights = ScoringWeights {
                w_sensitivity,
                w_variance: 1.0 - w_sensitivity,
                threshold: f64::from(t) / 100.0,
            };
            let f1 = classification_metrics(&predict(validation, &weights), &labels)?.f1;
            if best.is_none_or(|b| f1 > b.f1 + F1_TIE) {
                best = Some(Calibration { weights, f1 });
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}
