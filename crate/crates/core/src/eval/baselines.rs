use crate::backend::{Backend, BackendError};

/// Largest population standard deviation of values in [0, 1].
pub const MAX_STD: f64 = 0.5;

/// Hallucination score `1 - Conf(text)` for each text, in input order.
pub fn simple_confidence_scores(texts: &[&str], backend: &Backend) -> Result<Vec<f64>, BackendError> {
    backend
        .estimate_batch(texts)
        .into_iter()
        .map(|r| r.map(|s| 1.0 - s.value))
        .collect()
}

pub fn baseline_simple_confidence(texts: &[&str], backend: &Backend, tau: f64) -> Result<Vec<bool>, BackendError> {
    Ok(simple_confidence_scores(texts, backend)?.into_iter().map(|p| p > tau).collect())
}

/// Population standard deviation scaled by its maximum 0.5.
pub fn inconsistency(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (var.sqrt() / MAX_STD).clamp(0.0, 1.0)
}

/// Inconsistency of `m` sampled confidences per text.
pub fn self_consistency_scores(texts: &[&str], backend: &Backend, m: u32) -> Result<Vec<f64>, BackendError> {
    if m < 2 {
        log::warn!("self-consistency with m = {m} sample(s) has no spread; every score is 0");
    }
    texts.iter().map(|t| backend.sample(t, m).map(|s| inconsistency(&s))).collect()
}

pub fn baseline_self_consistency(
    texts: &[&str],
    backend: &Backend,
    m: u32,
    tau: f64,
) -> Result<Vec<bool>, BackendError> {
    Ok(self_consistency_scores(texts, backend, m)?.into_iter().map(|p| p > tau).collect())
}
