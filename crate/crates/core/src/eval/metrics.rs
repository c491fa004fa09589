use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Positive class is "hallucination".
pub fn classification_metrics(predictions: &[bool], labels: &[bool]) -> Result<Classification, EvalError> {
    check_lengths(predictions.len(), labels.len())?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(Classification {
        accuracy: ratio(tp + tn, predictions.len()),
        precision,
        recall,
        f1: f1_from(precision, recall),
    })
}

/// Compensated summation, so that e.g. ten copies of 0.8 sum to exactly 8.
fn fsum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Equal-width bin of a confidence: the first bin is `[0, 1/B]`, later bins
/// are `(b/B, (b+1)/B]`.
pub fn bin_index(confidence: f64, bins: usize) -> usize {
    (0..bins).find(|&b| confidence <= (b + 1) as f64 / bins as f64).unwrap_or(bins - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub bin_center: f64,
    pub mean_confidence: f64,
    pub accuracy: f64,
    pub count: usize,
}

fn check_inputs(confidences: &[f64], outcomes: &[bool]) -> Result<(), EvalError> {
    check_lengths(confidences.len(), outcomes.len())?;
    if let Some(&c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(EvalError::OutOfRange(c));
    }
    Ok(())
}

/// Per-bin mean confidence and accuracy; empty bins are left out.
pub fn calibration_curve(confidences: &[f64], correctness: &[bool], bins: usize) -> Result<Vec<CurveBin>, EvalError> {
    check_inputs(confidences, correctness)?;
    if bins == 0 {
        return Err(EvalError::InvalidBins);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (i, &c) in confidences.iter().enumerate() {
        members[bin_index(c, bins)].push(i);
    }
    Ok(members
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(b, m)| {
            let n = m.len() as f64;
            CurveBin {
                bin_center: (b as f64 + 0.5) / bins as f64,
                mean_confidence: fsum(m.iter().map(|&i| confidences[i])) / n,
                accuracy: m.iter().filter(|&&i| correctness[i]).count() as f64 / n,
                count: m.len(),
            }
        })
        .collect())
}

pub fn expected_calibration_error(confidences: &[f64], correctness: &[bool], bins: usize) -> Result<f64, EvalError> {
    let curve = calibration_curve(confidences, correctness, bins)?;
    let total = confidences.len() as f64;
    Ok(fsum(curve.iter().map(|b| b.count as f64 / total * (b.mean_confidence - b.accuracy).abs())))
}

/// Mean squared gap between confidence and outcome.
pub fn brier_score(confidences: &[f64], outcomes: &[bool]) -> Result<f64, EvalError> {
    check_inputs(confidences, outcomes)?;
    let sq = confidences.iter().zip(outcomes).map(|(&c, &o)| (c - if o { 1.0 } else { 0.0 }).powi(2));
    Ok(fsum(sq) / confidences.len() as f64)
}

/// CSV with header `bin_center,mean_confidence,accuracy,count`.
pub fn curve_to_csv(curve: &[CurveBin]) -> String {
    let mut out = String::from("bin_center,mean_confidence,accuracy,count\n");
    for b in curve {
        out.push_str(&format!("{},{},{},{}\n", b.bin_center, b.mean_confidence, b.accuracy, b.count));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_counted_confusion_matrix() {
        // TP=2, FP=1, FN=1, TN=6
        let preds = [true, true, true, false, false, false, false, false, false, false];
        let labels = [true, true, false, true, false, false, false, false, false, false];
        let m = classification_metrics(&preds, &labels).unwrap();
        assert_abs_diff_eq!(m.accuracy, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(m.precision, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.recall, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.f1, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_and_degenerate() {
        let m = classification_metrics(&[true, false], &[true, false]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        let none = classification_metrics(&[false, false], &[true, false]).unwrap();
        assert_eq!((none.precision, none.f1), (0.0, 0.0));
        assert!(matches!(classification_metrics(&[true], &[]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(classification_metrics(&[], &[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn ece_examples() {
        let conf = vec![0.8; 10];
        let correct: Vec<bool> = (0..10).map(|i| i < 8).collect();
        for bins in [1, 3, 10, 15] {
            assert_eq!(expected_calibration_error(&conf, &correct, bins).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(expected_calibration_error(&[1.0, 1.0], &[true, false], 10).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            expected_calibration_error(&[0.2, 0.9], &[false, true], 10).unwrap(),
            0.15,
            epsilon = 1e-12
        );
        assert!(expected_calibration_error(&[0.2], &[true], 0).is_err());
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(0.0, 10), 0);
        assert_eq!(bin_index(0.1, 10), 0);
        assert_eq!(bin_index(0.1000001, 10), 1);
        assert_eq!(bin_index(1.0, 10), 9);
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier_score(&[1.0, 0.0], &[true, false]).unwrap(), 0.0);
        assert_eq!(brier_score(&[0.5; 4], &[true, false, true, true]).unwrap(), 0.25);
        assert_abs_diff_eq!(brier_score(&[0.8, 0.3], &[true, false]).unwrap(), 0.065, epsilon = 1e-12);
        assert!(matches!(brier_score(&[1.2], &[true]), Err(EvalError::OutOfRange(_))));
    }

    #[test]
    fn curve_csv() {
        let curve = calibration_curve(&[0.05, 0.95, 0.92], &[false, true, false], 10).unwrap();
        assert_eq!(curve.len(), 2);
        let csv = curve_to_csv(&curve);
        assert!(csv.starts_with("bin_center,mean_confidence,accuracy,count\n0.05,0.05,0,1\n"));
    }
}
