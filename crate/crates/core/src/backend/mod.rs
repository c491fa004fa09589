//! Confidence estimation backends.
//!
//! A [`Backend`] wraps a [`ConfidenceSource`] (the remote chat-completion
//! client or the deterministic mock oracle) with a response cache and a hard
//! bound on in-flight source calls.

mod cache;
mod mock;
mod remote;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kind::ProbeKind;
use crate::parallel;
use crate::text::normalize;

pub use cache::{Cache, CacheRecord};
pub use mock::{mock_confidence, MockKnowledgeBase, MockSource};
pub use remote::{
    parse_confidence, ChatMessage, ChatRequest, ChatTransport, HttpTransport, RemoteSource, RetryPolicy,
    TransportError, API_KEY_ENV, ELICITATION_PROMPT,
};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("cache I/O error: {0}")]
    Cache(#[from] std::io::Error),
    #[error("knowledge base error: {0}")]
    KnowledgeBase(String),
}

impl BackendError {
    pub fn is_transport(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

impl Clone for BackendError {
    fn clone(&self) -> Self {
        match self {
            BackendError::Transport { attempts, message } => BackendError::Transport {
                attempts: *attempts,
                message: message.clone(),
            },
            BackendError::Config(m) => BackendError::Config(m.clone()),
            BackendError::Cache(e) => BackendError::Cache(std::io::Error::new(e.kind(), e.to_string())),
            BackendError::KnowledgeBase(m) => BackendError::KnowledgeBase(m.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

/// Mock oracle settings. `None` falls back to the knowledge-base file's own
/// settings record, then to the built-in defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MockConfig {
    pub kb_path: Option<PathBuf>,
    pub default_confidence: Option<f64>,
    pub jitter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    /// Temperature for repeated sampling (self-consistency baseline).
    pub sampling_temperature: f64,
    pub max_parallel: usize,
    pub retries: u32,
    pub timeout_secs: f64,
    /// First retry delay; doubles per attempt with +-20% jitter.
    pub backoff_base_secs: f64,
    pub cache_path: Option<PathBuf>,
    pub mock: MockConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model_name: "gpt-4".to_string(),
            temperature: 0.1,
            sampling_temperature: 1.0,
            max_parallel: 4,
            retries: 3,
            timeout_secs: 30.0,
            backoff_base_secs: 1.0,
            cache_path: None,
            mock: MockConfig::default(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..).contains(&self.temperature) || !(0.0..).contains(&self.sampling_temperature) {
            return Err(BackendError::Config("temperature must be >= 0".into()));
        }
        if self.max_parallel < 1 {
            return Err(BackendError::Config("max_parallel must be >= 1".into()));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(BackendError::Config("timeout_secs must be > 0".into()));
        }
        if !(0.0..).contains(&self.backoff_base_secs) {
            return Err(BackendError::Config("backoff_base_secs must be >= 0".into()));
        }
        if let Some(d) = self.mock.default_confidence {
            if !(0.0..=1.0).contains(&d) {
                return Err(BackendError::Config("mock.default_confidence must lie in [0,1]".into()));
            }
        }
        if let Some(j) = self.mock.jitter {
            if !(0.0..=0.1).contains(&j) {
                return Err(BackendError::Config("mock.jitter must lie in [0,0.1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceMethod {
    Verbalized,
    Mock,
}

/// Marker prepended to `raw` when no reply could be parsed and the score fell
/// back to 0.5.
pub const UNPARSEABLE_MARKER: &str = "[unparseable]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceScore {
    pub value: f64,
    pub raw: String,
    pub method: ConfidenceMethod,
    pub cached: bool,
}

impl ConfidenceScore {
    pub fn is_unparseable(&self) -> bool {
        self.raw.starts_with(UNPARSEABLE_MARKER)
    }
}

/// Inputs for a model-generated counterfactual.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub statement: &'a str,
    pub kind: ProbeKind,
    pub prompt: &'a str,
    /// Distinguishes repeated requests for the same statement and kind.
    pub variant: u32,
}

/// Something that can score a statement and, optionally, write counterfactuals.
pub trait ConfidenceSource: Send + Sync {
    fn method(&self) -> ConfidenceMethod;

    /// `replicate` separates repeated samples of the same text; 0 is the
    /// canonical estimate.
    fn confidence(&self, text: &str, temperature: f64, replicate: u32) -> Result<ConfidenceScore, BackendError>;

    /// `Ok(None)` means the source has nothing to offer for this request.
    fn generate(&self, request: &GenerationRequest<'_>, temperature: f64) -> Result<Option<String>, BackendError>;
}

/// Deterministic cache key: normalized text, model name and temperature at
/// fixed precision, hashed with SHA-256.
pub fn cache_key(text: &str, model_name: &str, temperature: f64) -> String {
    let canonical = format!("conf\u{1f}{model_name}\u{1f}{temperature:.4}\u{1f}{}", normalize(text));
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn generation_key(request: &GenerationRequest<'_>, model_name: &str, temperature: f64) -> String {
    let canonical = format!(
        "gen\u{1f}{model_name}\u{1f}{temperature:.4}\u{1f}{}\u{1f}{}\u{1f}{}",
        request.kind,
        request.variant,
        normalize(request.statement)
    );
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Counting semaphore bounding concurrent source calls.
#[derive(Debug)]
struct Limiter {
    capacity: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(capacity: usize) -> Self {
        Limiter { capacity: capacity.max(1), in_use: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_use.lock().expect("limiter poisoned");
        while *n >= self.capacity {
            n = self.freed.wait(n).expect("limiter poisoned");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_use.lock().expect("limiter poisoned");
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// A shareable confidence backend: source + cache + concurrency bound.
pub struct Backend {
    source: Box<dyn ConfidenceSource>,
    model_name: String,
    temperature: f64,
    sampling_temperature: f64,
    max_parallel: usize,
    limiter: Limiter,
    cache: Cache,
    source_calls: AtomicUsize,
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend")
            .field("model_name", &self.model_name)
            .field("temperature", &self.temperature)
            .field("max_parallel", &self.max_parallel)
            .finish_non_exhaustive()
    }
}

impl Backend {
    pub fn new(source: Box<dyn ConfidenceSource>, config: &BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let cache = match &config.cache_path {
            Some(path) => Cache::open(path)?,
            None => Cache::in_memory(),
        };
        Ok(Backend {
            source,
            model_name: config.model_name.clone(),
            temperature: config.temperature,
            sampling_temperature: config.sampling_temperature,
            max_parallel: config.max_parallel,
            limiter: Limiter::new(config.max_parallel),
            cache,
            source_calls: AtomicUsize::new(0),
        })
    }

    /// Builds the backend described by `config`: the mock oracle (seeded with
    /// `seed`) or the remote chat-completion client.
    pub fn from_config(config: &BackendConfig, seed: u64) -> Result<Self, BackendError> {
        config.validate()?;
        let source: Box<dyn ConfidenceSource> = match config.kind {
            BackendKind::Mock => {
                let kb = match &config.mock.kb_path {
                    Some(path) => MockKnowledgeBase::load(path)?,
                    None => MockKnowledgeBase::default(),
                }
                .with_overrides(config.mock.default_confidence, config.mock.jitter)?;
                Box::new(MockSource::new(kb, seed))
            }
            BackendKind::Remote => Box::new(RemoteSource::new(
                HttpTransport::new(&config.endpoint, Duration::from_secs_f64(config.timeout_secs))?,
                &config.model_name,
                RetryPolicy::from_config(config),
            )),
        };
        Backend::new(source, config)
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Number of calls that reached the underlying source (cache misses).
    pub fn source_calls(&self) -> usize {
        self.source_calls.load(Ordering::SeqCst)
    }

    fn call_source<T>(&self, f: impl FnOnce(&dyn ConfidenceSource) -> T) -> T {
        let _permit = self.limiter.acquire();
        self.source_calls.fetch_add(1, Ordering::SeqCst);
        f(self.source.as_ref())
    }

    /// Confidence for one statement, consulting the cache first.
    pub fn estimate(&self, text: &str) -> Result<ConfidenceScore, BackendError> {
        let key = cache_key(text, &self.model_name, self.temperature);
        self.cache.get_or_try_insert(&key, || {
            let score = self.call_source(|s| s.confidence(text, self.temperature, 0))?;
            Ok(CacheRecord::Confidence { value: score.value, raw: score.raw, method: score.method })
        })
        .map(|(record, cached)| match record {
            CacheRecord::Confidence { value, raw, method } => ConfidenceScore { value, raw, method, cached },
            CacheRecord::Generation { .. } => unreachable!("confidence keys never hold generations"),
        })
    }

    /// Scores in input order. Duplicates are fetched once; later copies come
    /// back marked `cached`. Each item fails independently.
    pub fn estimate_batch(&self, texts: &[&str]) -> Vec<Result<ConfidenceScore, BackendError>> {
        let keys: Vec<String> = texts.iter().map(|t| cache_key(t, &self.model_name, self.temperature)).collect();
        let mut first_of: Vec<usize> = Vec::with_capacity(texts.len());
        let mut unique: Vec<usize> = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            match unique.iter().find(|&&u| keys[u] == *key) {
                Some(&u) => first_of.push(u),
                None => {
                    unique.push(i);
                    first_of.push(i);
                }
            }
        }
        let fetched = parallel::ordered_map(&unique, self.max_parallel, |_, &i| self.estimate(texts[i]));
        let mut by_index: Vec<Option<Result<ConfidenceScore, BackendError>>> = vec![None; texts.len()];
        for (&i, result) in unique.iter().zip(fetched) {
            by_index[i] = Some(result);
        }
        (0..texts.len())
            .map(|i| {
                let origin = first_of[i];
                if origin == i {
                    by_index[i].take().expect("unique slot filled")
                } else {
                    by_index[origin].clone().expect("origin resolved first").map(|mut s| {
                        s.cached = true;
                        s
                    })
                }
            })
            .collect()
    }

    /// `m` independent confidence samples at the sampling temperature. Not cached.
    pub fn sample(&self, text: &str, m: u32) -> Result<Vec<f64>, BackendError> {
        let replicates: Vec<u32> = (0..m).collect();
        parallel::ordered_map(&replicates, self.max_parallel, |_, &r| {
            self.call_source(|s| s.confidence(text, self.sampling_temperature, r + 1))
                .map(|score| score.value)
        })
        .into_iter()
        .collect()
    }

    /// Model-written counterfactual, cached like confidence replies.
    pub fn generate(&self, request: &GenerationRequest<'_>) -> Result<Option<String>, BackendError> {
        let key = generation_key(request, &self.model_name, self.temperature);
        self.cache
            .get_or_try_insert(&key, || {
                let text = self.call_source(|s| s.generate(request, self.temperature))?;
                Ok(CacheRecord::Generation { text })
            })
            .map(|(record, _)| match record {
                CacheRecord::Generation { text } => text,
                CacheRecord::Confidence { .. } => unreachable!("generation keys never hold confidences"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_key_normalizes() {
        assert_eq!(cache_key("A  b", "m", 0.1), cache_key("a b", "m", 0.1));
        assert_ne!(cache_key("a b", "m", 0.1), cache_key("a b", "n", 0.1));
        assert_eq!(cache_key("a b", "m", 0.1), cache_key("a b", "m", 0.10));
        assert_ne!(cache_key("a b", "m", 0.1), cache_key("a b", "m", 0.2));
        // Stable across processes: pinned digest.
        assert_eq!(cache_key("x", "m", 0.1).len(), 64);
    }

    #[test]
    fn config_validation() {
        let mut c = BackendConfig::default();
        assert!(c.validate().is_ok());
        c.max_parallel = 0;
        assert!(c.validate().is_err());
        c = BackendConfig { temperature: -0.1, ..BackendConfig::default() };
        assert!(c.validate().is_err());
        c = BackendConfig::default();
        c.mock.jitter = Some(0.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn defaults_match_published_settings() {
        let c = BackendConfig::default();
        assert_eq!(c.temperature, 0.1);
        assert_eq!(c.max_parallel, 4);
        assert_eq!(c.retries, 3);
    }
}
