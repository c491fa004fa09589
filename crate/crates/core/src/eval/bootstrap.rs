use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Linear interpolation between closest ranks of sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval: resamples `examples` with replacement
/// `iterations` times from a ChaCha8 stream seeded with `seed`.
pub fn bootstrap_ci<T: Clone>(
    examples: &[T],
    metric: impl Fn(&[T]) -> f64,
    iterations: usize,
    seed: u64,
    level: f64,
) -> Result<(f64, f64), EvalError> {
    if examples.is_empty() || iterations == 0 {
        return Err(EvalError::EmptyInput);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidLevel(level));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = examples.len();
    let mut sample = Vec::with_capacity(n);
    let mut values: Vec<f64> = (0..iterations)
        .map(|_| {
            sample.clear();
            sample.extend((0..n).map(|_| examples[rng.random_range(0..n)].clone()));
            metric(&sample)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((percentile(&values, tail), percentile(&values, 1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn constant_metric_collapses() {
        let ci = bootstrap_ci(&[1.0, 2.0, 3.0], |_| 0.42, 200, 1, 0.95).unwrap();
        assert_eq!(ci, (0.42, 0.42));
    }

    #[test]
    fn deterministic_under_seed() {
        let data: Vec<f64> = (0..30).map(|i| (i * 7 % 11) as f64).collect();
        let a = bootstrap_ci(&data, mean, 1000, 9, 0.95).unwrap();
        let b = bootstrap_ci(&data, mean, 1000, 9, 0.95).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert!(a.0 < a.1);
        assert_ne!(a, bootstrap_ci(&data, mean, 1000, 10, 0.95).unwrap());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
    }

    #[test]
    fn rejects_empty_and_bad_level() {
        assert!(bootstrap_ci::<f64>(&[], |_| 0.0, 10, 0, 0.95).is_err());
        assert!(bootstrap_ci(&[1.0], |_| 0.0, 0, 0, 0.95).is_err());
        assert!(bootstrap_ci(&[1.0], |_| 0.0, 10, 0, 1.0).is_err());
    }
}
