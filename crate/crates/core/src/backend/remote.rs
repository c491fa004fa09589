//! Chat-completion client for verbalized confidence elicitation.

use std::sync::LazyLock;
use std::time::Duration;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    BackendConfig, BackendError, ConfidenceMethod, ConfidenceScore, ConfidenceSource, GenerationRequest,
    UNPARSEABLE_MARKER,
};

/// Environment variable holding the bearer token for the remote endpoint.
pub const API_KEY_ENV: &str = "CFPROBE_API_KEY";

pub const ELICITATION_PROMPT: &str =
    "Rate the probability that the following statement is factually true. Answer with only a number between 0 and 1.";

const FALLBACK_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body for an OpenAI-style `/chat/completions` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn user(model: &str, temperature: f64, content: String) -> Self {
        ChatRequest {
            model: model.to_string(),
            temperature,
            messages: vec![ChatMessage { role: "user".into(), content }],
        }
    }

    pub fn content(&self) -> &str {
        self.messages.first().map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// Sends one chat request and returns the first choice's text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Option<ReplyMessage>,
    text: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// Blocking HTTP+JSON transport.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(HttpTransport {
            client,
            endpoint: endpoint.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| TransportError(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(TransportError(format!("HTTP {status}: {}", body.chars().take(200).collect::<String>())));
        }
        let parsed: ChatResponse = response.json().map_err(|e| TransportError(format!("bad response body: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| TransportError("response has no choices".into()))?;
        choice
            .message
            .and_then(|m| m.content)
            .or(choice.text)
            .ok_or_else(|| TransportError("first choice has no text".into()))
    }
}

/// Exponential backoff: `base * 2^n`, jittered by +-20%.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base: Duration,
}

impl RetryPolicy {
    pub fn from_config(config: &BackendConfig) -> Self {
        RetryPolicy { retries: config.retries, base: Duration::from_secs_f64(config.backoff_base_secs) }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let nominal = self.base.as_secs_f64() * 2f64.powi(retry.min(30) as i32);
        let factor = rand::rng().random_range(0.8..=1.2);
        Duration::from_secs_f64(nominal * factor)
    }
}

static NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?|\.\d+)\s*(%)?").expect("number regex"));

/// First decimal number in a model reply, clamped to [0,1]; a trailing `%`
/// is read as a percentage.
pub fn parse_confidence(reply: &str) -> Option<f64> {
    let caps = NUMBER_RE.captures(reply)?;
    let mut value: f64 = caps[1].parse().ok()?;
    if caps.get(2).is_some() {
        value /= 100.0;
    }
    value.is_finite().then(|| value.clamp(0.0, 1.0))
}

fn clean_generation(reply: &str) -> Option<String> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = ["Counterfactual:", "counterfactual:", "Answer:", "->", "→"]
        .iter()
        .fold(line, |l, prefix| l.strip_prefix(prefix).map_or(l, str::trim));
    let line = line.trim_matches(|c| matches!(c, '"' | '\'' | '“' | '”')).trim();
    (!line.is_empty()).then(|| line.to_string())
}

/// Verbalized-confidence source over any [`ChatTransport`].
#[derive(Debug, Clone)]
pub struct RemoteSource<T> {
    transport: T,
    model_name: String,
    policy: RetryPolicy,
}

enum Failure {
    Transport(TransportError),
    Unparseable(String),
}

impl<T: ChatTransport> RemoteSource<T> {
    pub fn new(transport: T, model_name: &str, policy: RetryPolicy) -> Self {
        RemoteSource { transport, model_name: model_name.to_string(), policy }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Calls the transport until `accept` yields a value or retries run out.
    fn with_retries<V>(
        &self,
        request: &ChatRequest,
        accept: impl Fn(&str) -> Option<V>,
    ) -> (Result<V, Failure>, u32) {
        let mut last = Failure::Transport(TransportError("no attempt made".into()));
        let attempts = self.policy.retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.policy.delay(attempt - 1));
            }
            match self.transport.complete(request) {
                Ok(reply) => match accept(&reply) {
                    Some(v) => return (Ok(v), attempt + 1),
                    None => last = Failure::Unparseable(reply),
                },
                Err(e) => {
                    log::debug!("attempt {} failed: {e}", attempt + 1);
                    last = Failure::Transport(e);
                }
            }
        }
        (Err(last), attempts)
    }
}

impl<T: ChatTransport> ConfidenceSource for RemoteSource<T> {
    fn method(&self) -> ConfidenceMethod {
        ConfidenceMethod::Verbalized
    }

    fn confidence(&self, text: &str, temperature: f64, _replicate: u32) -> Result<ConfidenceScore, BackendError> {
        let request = ChatRequest::user(&self.model_name, temperature, format!("{ELICITATION_PROMPT}\n\nStatement: {text}"));
        let (outcome, attempts) = self.with_retries(&request, |reply| parse_confidence(reply).map(|v| (v, reply.to_string())));
        match outcome {
            Ok((value, raw)) => Ok(ConfidenceScore { value, raw, method: ConfidenceMethod::Verbalized, cached: false }),
            Err(Failure::Unparseable(reply)) => {
                log::warn!("no confidence in reply after {attempts} attempt(s); using {FALLBACK_CONFIDENCE}");
                Ok(ConfidenceScore {
                    value: FALLBACK_CONFIDENCE,
                    raw: format!("{UNPARSEABLE_MARKER} {reply}"),
                    method: ConfidenceMethod::Verbalized,
                    cached: false,
                })
            }
            Err(Failure::Transport(e)) => Err(BackendError::Transport { attempts, message: e.0 }),
        }
    }

    fn generate(&self, request: &GenerationRequest<'_>, temperature: f64) -> Result<Option<String>, BackendError> {
        let chat = ChatRequest::user(&self.model_name, temperature, request.prompt.to_string());
        let (outcome, attempts) = self.with_retries(&chat, |reply| Some(clean_generation(reply)));
        match outcome {
            Ok(text) => Ok(text),
            Err(Failure::Unparseable(_)) => Ok(None),
            Err(Failure::Transport(e)) => Err(BackendError::Transport { attempts, message: e.0 }),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    use super::*;

    /// Replays scripted outcomes; the last one repeats.
    struct Scripted {
        replies: Mutex<Vec<Result<String, TransportError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(replies: Vec<Result<&str, &str>>) -> Self {
            Scripted {
                replies: Mutex::new(
                    replies
                        .into_iter()
                        .map(|r| r.map(str::to_string).map_err(|e| TransportError(e.to_string())))
                        .collect(),
                ),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl ChatTransport for Scripted {
        fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
            assert_eq!(request.messages.len(), 1);
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            let replies = self.replies.lock().unwrap();
            replies[n.min(replies.len() - 1)].clone()
        }
    }

    fn source(replies: Vec<Result<&str, &str>>) -> RemoteSource<Scripted> {
        RemoteSource::new(Scripted::new(replies), "m", RetryPolicy { retries: 3, base: Duration::ZERO })
    }

    #[test]
    fn parses_plain_reply() {
        let s = source(vec![Ok("0.85\n")]).confidence("x", 0.1, 0).unwrap();
        assert_eq!(s.value, 0.85);
        assert_eq!(s.raw, "0.85\n");
        assert!(!s.is_unparseable());
    }

    #[test]
    fn parse_variants() {
        assert_eq!(parse_confidence("Probability: 0.7."), Some(0.7));
        assert_eq!(parse_confidence("85%"), Some(0.85));
        assert_eq!(parse_confidence("7"), Some(1.0));
        assert_eq!(parse_confidence(".25"), Some(0.25));
        assert_eq!(parse_confidence("I am not sure"), None);
    }

    #[test]
    fn retries_unparseable_then_succeeds() {
        let src = source(vec![Ok("maybe"), Err("timeout"), Ok("0.3")]);
        assert_eq!(src.confidence("x", 0.1, 0).unwrap().value, 0.3);
        assert_eq!(src.transport().calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn unparseable_exhaustion_falls_back() {
        let src = source(vec![Ok("no idea")]);
        let s = src.confidence("x", 0.1, 0).unwrap();
        assert_eq!(s.value, 0.5);
        assert!(s.is_unparseable());
        assert_eq!(src.transport().calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn transport_exhaustion_errors() {
        let src = source(vec![Err("connection refused")]);
        let err = src.confidence("x", 0.1, 0).unwrap_err();
        assert!(matches!(err, BackendError::Transport { attempts: 4, .. }), "{err}");
    }

    #[test]
    fn prompt_carries_statement() {
        struct Echo;
        impl ChatTransport for Echo {
            fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
                assert!(request.content().starts_with(ELICITATION_PROMPT));
                assert!(request.content().ends_with("Statement: The sky is blue"));
                assert_eq!(request.temperature, 0.1);
                Ok("0.99".into())
            }
        }
        let src = RemoteSource::new(Echo, "m", RetryPolicy { retries: 0, base: Duration::ZERO });
        assert_eq!(src.confidence("The sky is blue", 0.1, 0).unwrap().value, 0.99);
    }

    #[test]
    fn backoff_doubles_with_bounded_jitter() {
        let p = RetryPolicy { retries: 3, base: Duration::from_secs(1) };
        for n in 0..4 {
            let d = p.delay(n).as_secs_f64();
            let nominal = 2f64.powi(n as i32);
            assert!(d >= nominal * 0.8 - 1e-9 && d <= nominal * 1.2 + 1e-9, "{d}");
        }
    }

    #[test]
    fn generation_reply_is_cleaned() {
        assert_eq!(clean_generation("\n Counterfactual: \"Newton developed it\"\nextra").as_deref(), Some("Newton developed it"));
        assert_eq!(clean_generation("   "), None);
    }
}
