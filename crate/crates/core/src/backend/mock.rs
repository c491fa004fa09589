//! Deterministic offline oracle standing in for a remote model.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, ConfidenceMethod, ConfidenceScore, ConfidenceSource, GenerationRequest};
use crate::kind::ProbeKind;
use crate::text::normalize;

pub const DEFAULT_MOCK_CONFIDENCE: f64 = 0.6;
pub const DEFAULT_MOCK_JITTER: f64 = 0.02;
const MAX_JITTER: f64 = 0.1;

/// Statement → base confidence table, plus optional canned counterfactuals
/// served when the pipeline asks the model to write probes.
#[derive(Debug, Clone, PartialEq)]
pub struct MockKnowledgeBase {
    /// Keyed by normalized statement text.
    pub entries: BTreeMap<String, f64>,
    pub counterfactuals: BTreeMap<String, Vec<(ProbeKind, String)>>,
    pub default_confidence: f64,
    pub jitter: f64,
}

impl Default for MockKnowledgeBase {
    fn default() -> Self {
        MockKnowledgeBase {
            entries: BTreeMap::new(),
            counterfactuals: BTreeMap::new(),
            default_confidence: DEFAULT_MOCK_CONFIDENCE,
            jitter: DEFAULT_MOCK_JITTER,
        }
    }
}

/// One line of a knowledge-base file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum KbRecord {
    Confidence { text: String, confidence: f64 },
    Counterfactual { statement: String, kind: ProbeKind, counterfactual: String },
    Settings { default_confidence: Option<f64>, jitter: Option<f64> },
}

fn check_unit(v: f64, what: &str) -> Result<f64, BackendError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(BackendError::KnowledgeBase(format!("{what} {v} outside [0,1]")))
    }
}

fn check_jitter(v: f64) -> Result<f64, BackendError> {
    if (0.0..=MAX_JITTER).contains(&v) {
        Ok(v)
    } else {
        Err(BackendError::KnowledgeBase(format!("jitter {v} outside [0,{MAX_JITTER}]")))
    }
}

impl MockKnowledgeBase {
    pub fn new(default_confidence: f64, jitter: f64) -> Result<Self, BackendError> {
        Ok(MockKnowledgeBase {
            default_confidence: check_unit(default_confidence, "default confidence")?,
            jitter: check_jitter(jitter)?,
            ..Default::default()
        })
    }

    pub fn insert(&mut self, text: &str, confidence: f64) -> Result<(), BackendError> {
        self.entries.insert(normalize(text), check_unit(confidence, "confidence")?);
        Ok(())
    }

    pub fn insert_counterfactual(&mut self, statement: &str, kind: ProbeKind, counterfactual: &str) {
        self.counterfactuals
            .entry(normalize(statement))
            .or_default()
            .push((kind, counterfactual.to_string()));
    }

    pub fn base_confidence(&self, text: &str) -> f64 {
        self.entries.get(&normalize(text)).copied().unwrap_or(self.default_confidence)
    }

    pub fn with_overrides(mut self, default_confidence: Option<f64>, jitter: Option<f64>) -> Result<Self, BackendError> {
        if let Some(d) = default_confidence {
            self.default_confidence = check_unit(d, "default confidence")?;
        }
        if let Some(j) = jitter {
            self.jitter = check_jitter(j)?;
        }
        Ok(self)
    }

    /// Reads a JSON-lines file of `{"text", "confidence"}`,
    /// `{"statement", "kind", "counterfactual"}` and
    /// `{"default_confidence", "jitter"}` records.
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = File::open(path)
            .map_err(|e| BackendError::KnowledgeBase(format!("cannot open {}: {e}", path.display())))?;
        let mut kb = MockKnowledgeBase::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: KbRecord = serde_json::from_str(&line).map_err(|e| {
                BackendError::KnowledgeBase(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            match record {
                KbRecord::Confidence { text, confidence } => kb.insert(&text, confidence).map_err(|e| {
                    BackendError::KnowledgeBase(format!("{}:{}: {e}", path.display(), n + 1))
                })?,
                KbRecord::Counterfactual { statement, kind, counterfactual } => {
                    kb.insert_counterfactual(&statement, kind, &counterfactual)
                }
                KbRecord::Settings { default_confidence, jitter } => {
                    kb = kb.with_overrides(default_confidence, jitter)?;
                }
            }
        }
        Ok(kb)
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let mut out = BufWriter::new(File::create(path)?);
        let settings = KbRecord::Settings { default_confidence: Some(self.default_confidence), jitter: Some(self.jitter) };
        writeln!(out, "{}", serde_json::to_string(&settings).expect("serializable"))?;
        for (text, confidence) in &self.entries {
            let r = KbRecord::Confidence { text: text.clone(), confidence: *confidence };
            writeln!(out, "{}", serde_json::to_string(&r).expect("serializable"))?;
        }
        for (statement, cfs) in &self.counterfactuals {
            for (kind, cf) in cfs {
                let r = KbRecord::Counterfactual { statement: statement.clone(), kind: *kind, counterfactual: cf.clone() };
                writeln!(out, "{}", serde_json::to_string(&r).expect("serializable"))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Uniform draw in [0, 1) derived from the normalized text and seed.
fn unit_hash(text: &str, seed: u64) -> f64 {
    let digest = Sha256::digest(format!("{seed}\u{1f}{}", normalize(text)).as_bytes());
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(word) >> 11) as f64 / (1u64 << 53) as f64
}

/// Table confidence (or the default) plus deterministic jitter in
/// `[-jitter, +jitter]`, clamped to [0,1].
pub fn mock_confidence(text: &str, kb: &MockKnowledgeBase, seed: u64) -> ConfidenceScore {
    let base = kb.base_confidence(text);
    let offset = if kb.jitter > 0.0 { (2.0 * unit_hash(text, seed) - 1.0) * kb.jitter } else { 0.0 };
    let value = (base + offset).clamp(0.0, 1.0);
    ConfidenceScore { value, raw: format!("{value}"), method: ConfidenceMethod::Mock, cached: false }
}

/// [`ConfidenceSource`] over a [`MockKnowledgeBase`]. Replicate `r > 0`
/// re-draws the jitter with a derived seed.
#[derive(Debug, Clone)]
pub struct MockSource {
    kb: MockKnowledgeBase,
    seed: u64,
}

impl MockSource {
    pub fn new(kb: MockKnowledgeBase, seed: u64) -> Self {
        MockSource { kb, seed }
    }

    pub fn knowledge_base(&self) -> &MockKnowledgeBase {
        &self.kb
    }
}

impl ConfidenceSource for MockSource {
    fn method(&self) -> ConfidenceMethod {
        ConfidenceMethod::Mock
    }

    fn confidence(&self, text: &str, _temperature: f64, replicate: u32) -> Result<ConfidenceScore, BackendError> {
        let seed = if replicate == 0 {
            self.seed
        } else {
            self.seed ^ u64::from(replicate).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        };
        Ok(mock_confidence(text, &self.kb, seed))
    }

    fn generate(&self, request: &GenerationRequest<'_>, _temperature: f64) -> Result<Option<String>, BackendError> {
        Ok(self
            .kb
            .counterfactuals
            .get(&normalize(request.statement))
            .and_then(|cfs| {
                cfs.iter()
                    .filter(|(k, _)| *k == request.kind)
                    .nth(request.variant as usize)
                    .map(|(_, t)| t.clone())
            }))
    }
}
