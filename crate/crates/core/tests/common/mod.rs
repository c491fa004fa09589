#![allow(dead_code)]

use std::path::PathBuf;

use cfprobe::eval::{load_dataset, LabeledExample};
use cfprobe::{Pipeline, RunConfig};

pub fn workspace_data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Relative to the package root, which is the working directory of
/// integration tests, so config digests do not depend on the checkout path.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn corpus(name: &str) -> Vec<LabeledExample> {
    load_dataset(&workspace_data(&format!("{name}.jsonl"))).expect("shipped dataset loads")
}

pub fn mock_config(kb: PathBuf, seed: u64, parallel: usize) -> RunConfig {
    let mut config = RunConfig { seed, parallel_statements: parallel, ..RunConfig::default() };
    config.backend.mock.kb_path = Some(kb);
    config
}

pub fn synthetic_pipeline(seed: u64) -> Pipeline {
    Pipeline::new(mock_config(workspace_data("mock_kb.jsonl"), seed, 4)).expect("mock pipeline")
}

/// Mean absolute gap, summed left to right.
pub fn brute_sensitivity(s: f64, cs: &[f64]) -> f64 {
    let mut total = 0.0;
    for c in cs {
        total += if s > *c { s - c } else { c - s };
    }
    total / cs.len() as f64
}

/// ECE with bins assigned by `ceil(c * B) - 1`.
pub fn brute_ece(conf: &[f64], correct: &[bool], bins: usize) -> f64 {
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for (c, ok) in conf.iter().zip(correct) {
        let b = ((c * bins as f64).ceil() as usize).saturating_sub(1).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += c;
        hits[b] += usize::from(*ok);
    }
    let n = conf.len() as f64;
    let mut ece = 0.0;
    for b in 0..bins {
        if count[b] > 0 {
            let m = count[b] as f64;
            ece += m / n * (conf_sum[b] / m - hits[b] as f64 / m).abs();
        }
    }
    ece
}

pub fn brute_brier(conf: &[f64], outcome: &[bool]) -> f64 {
    let mut total = 0.0;
    for (c, o) in conf.iter().zip(outcome) {
        let y = if *o { 1.0 } else { 0.0 };
        total += (c - y) * (c - y);
    }
    total / conf.len() as f64
}

/// F1 from raw counts.
pub fn brute_f1(predictions: &[bool], labels: &[bool]) -> f64 {
    let tp = predictions.iter().zip(labels).filter(|(p, l)| **p && **l).count() as f64;
    let fp = predictions.iter().zip(labels).filter(|(p, l)| **p && !**l).count() as f64;
    let fn_ = predictions.iter().zip(labels).filter(|(p, l)| !**p && **l).count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}
