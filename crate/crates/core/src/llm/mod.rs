//! Provider-neutral access to chat models.
//!
//! [`Gateway`] wraps a [`Backend`] with retry/backoff and token accounting.
//! Backends are either live HTTP providers or a [`ScriptedBackend`] that
//! replays canned replies for offline, deterministic runs.

mod openai;
mod scripted;

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ProviderKind};

pub use openai::OpenAiCompatible;
pub use scripted::{load_script, FailKind, ScriptStep, ScriptedBackend};

pub const API_KEY_ENV: &str = "AKM_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_id: String,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: 0.0,
            max_output_tokens: 8192,
            model_id: model_id.into(),
        }
    }

    pub fn input_token_estimate(&self) -> usize {
        estimate_tokens(&self.system_prompt) + estimate_tokens(&self.user_prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub input_token_estimate: usize,
    pub output_token_estimate: usize,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

/// Budgeting heuristic: one token per four characters, rounded up.
/// Not a tokenizer and never used for billing.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Timeouts, rate limits and server-side failures; worth retrying.
    Transient,
    Fatal,
    /// The scripted backend ran out of replies.
    ScriptExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} backend error: {message}")]
pub struct BackendError {
    pub kind: ErrorKind,
    pub message: String,
}

impl BackendError {
    pub fn transient(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Transient, message: message.into() }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Fatal, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider error after {attempts} attempt(s): {message}")]
    Provider { message: String, attempts: u32 },
    #[error("retry budget exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { last: String, attempts: u32 },
    #[error("test script exhausted: {0}")]
    ScriptExhausted(String),
    #[error("backend configuration error: {0}")]
    Configuration(String),
    /// A failure reproduced from a run record, carrying its original message.
    #[error("{0}")]
    Recorded(String),
}

/// One raw call to a model provider.
pub trait Backend: Send + Sync {
    fn call(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

/// Anything that can answer a chat request. Implemented by [`Gateway`] and by
/// the orchestrator's stage-aware adapters.
pub trait Completer {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub budget: u32,
    pub base: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { budget: 3, base: Duration::from_secs(1), factor: 2.0 }
    }
}

impl RetryPolicy {
    /// Upper bound of the full-jitter delay that follows failed attempt `attempt` (1-based).
    pub fn backoff_cap(&self, attempt: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(attempt.saturating_sub(1) as i32))
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

pub struct Gateway {
    backend: Arc<dyn Backend>,
    retry: RetryPolicy,
    jitter: Mutex<ChaCha8Rng>,
    sleeper: Sleeper,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, retry: RetryPolicy, seed: u64) -> Self {
        Self {
            backend,
            retry,
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            sleeper: Box::new(std::thread::sleep),
        }
    }

    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    /// Builds the backend selected by `llm.provider`.
    pub fn from_config(config: &Config) -> Result<Self, LlmError> {
        let llm = &config.llm;
        let backend: Arc<dyn Backend> = match llm.provider {
            ProviderKind::Scripted => {
                let path = llm.script_path.as_deref().ok_or_else(|| {
                    LlmError::Configuration("llm.script_path is required for the scripted provider".into())
                })?;
                let key = format!("{}:{}", config.pipeline, llm.model_id);
                Arc::new(ScriptedBackend::new(load_script(path, &key, config.pipeline.as_str())?))
            }
            ProviderKind::Openai | ProviderKind::Gemini => {
                let api_key = std::env::var(API_KEY_ENV)
                    .map_err(|_| LlmError::Configuration(format!("{API_KEY_ENV} is not set")))?;
                Arc::new(OpenAiCompatible::new(
                    llm.provider,
                    llm.base_url.clone(),
                    api_key,
                    Duration::from_secs(llm.timeout_secs),
                ))
            }
        };
        let retry =
            RetryPolicy { budget: llm.retry_budget, base: Duration::from_millis(llm.backoff_base_ms), factor: 2.0 };
        Ok(Self::new(backend, retry, config.seed))
    }

    fn backoff(&self, attempt: u32) {
        let cap = self.retry.backoff_cap(attempt);
        if cap.is_zero() {
            return;
        }
        let frac: f64 = self.jitter.lock().expect("jitter rng poisoned").random();
        (self.sleeper)(cap.mul_f64(frac));
    }
}

impl Completer for Gateway {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        if request.user_prompt.is_empty() {
            return Err(LlmError::InvalidRequest("user prompt is empty".into()));
        }
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.backend.call(request) {
                Ok(text) => {
                    return Ok(ChatResponse {
                        input_token_estimate: request.input_token_estimate(),
                        output_token_estimate: estimate_tokens(&text),
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt_count: attempt,
                    });
                }
                Err(e) => match e.kind {
                    ErrorKind::Fatal => return Err(LlmError::Provider { message: e.message, attempts: attempt }),
                    ErrorKind::ScriptExhausted => return Err(LlmError::ScriptExhausted(e.message)),
                    ErrorKind::Transient if attempt >= self.retry.budget => {
                        return Err(LlmError::RetriesExhausted { last: e.message, attempts: attempt });
                    }
                    ErrorKind::Transient => {
                        log::warn!("transient provider error (attempt {attempt}): {}", e.message);
                        self.backoff(attempt);
                    }
                },
            }
        }
    }
}

pub(crate) fn read_script_file(path: &Path) -> Result<String, LlmError> {
    std::fs::read_to_string(path)
        .map_err(|e| LlmError::Configuration(format!("cannot read script {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn gateway(steps: Vec<ScriptStep>, budget: u32) -> (Gateway, Arc<ScriptedBackend>) {
        let backend = Arc::new(ScriptedBackend::new(steps));
        let retry = RetryPolicy { budget, base: Duration::ZERO, factor: 2.0 };
        (Gateway::new(backend.clone(), retry, 7), backend)
    }

    fn req() -> ChatRequest {
        ChatRequest::new("m", "sys", "hi")
    }

    #[test]
    fn token_estimates() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("12345678"), 2);
        assert_eq!(estimate_tokens("123456789"), 3);
        assert_eq!(estimate_tokens("ééé"), 1);
    }

    #[test]
    fn scripted_reply() {
        let (gw, _) = gateway(vec![ScriptStep::reply("hello")], 3);
        let resp = gw.complete(&req()).unwrap();
        assert_eq!(resp.text, "hello");
        assert_eq!(resp.attempt_count, 1);
        assert_eq!(resp.output_token_estimate, 2);
    }

    #[test]
    fn retries_transient_failures() {
        let steps =
            vec![ScriptStep::Fail(FailKind::Transient), ScriptStep::Fail(FailKind::Transient), ScriptStep::reply("ok")];
        let (gw, backend) = gateway(steps, 3);
        let resp = gw.complete(&req()).unwrap();
        assert_eq!(resp.text, "ok");
        assert_eq!(resp.attempt_count, 3);
        assert_eq!(backend.calls().len(), 3);
    }

    #[test]
    fn budget_exhaustion_stops_at_budget() {
        let steps = vec![ScriptStep::Fail(FailKind::Transient); 4];
        let (gw, backend) = gateway(steps, 3);
        let err = gw.complete(&req()).unwrap_err();
        assert!(matches!(err, LlmError::RetriesExhausted { attempts: 3, .. }), "{err:?}");
        assert_eq!(backend.calls().len(), 3);
    }

    #[test]
    fn fatal_error_is_immediate() {
        let steps = vec![ScriptStep::Fail(FailKind::Fatal), ScriptStep::reply("unused")];
        let (gw, backend) = gateway(steps, 3);
        assert!(matches!(gw.complete(&req()), Err(LlmError::Provider { attempts: 1, .. })));
        assert_eq!(backend.calls().len(), 1);
    }

    #[test]
    fn exhausted_script_is_config_error() {
        let (gw, _) = gateway(vec![], 3);
        assert!(matches!(gw.complete(&req()), Err(LlmError::ScriptExhausted(_))));
    }

    #[test]
    fn backoff_is_full_jitter_under_exponential_cap() {
        let policy = RetryPolicy::default();
        assert_eq!(policy.backoff_cap(1), Duration::from_secs(1));
        assert_eq!(policy.backoff_cap(2), Duration::from_secs(2));
        assert_eq!(policy.backoff_cap(3), Duration::from_secs(4));

        let slept = Arc::new(Mutex::new(Vec::new()));
        let log = slept.clone();
        let backend = Arc::new(ScriptedBackend::new(vec![ScriptStep::Fail(FailKind::Transient); 3]));
        let gw = Gateway::new(backend, policy, 1).with_sleeper(move |d| log.lock().unwrap().push(d));
        gw.complete(&req()).unwrap_err();
        let slept = slept.lock().unwrap();
        assert_eq!(slept.len(), 2, "no sleep after the final attempt");
        assert!(slept[0] <= Duration::from_secs(1));
        assert!(slept[1] <= Duration::from_secs(2));
    }

    #[test]
    fn empty_prompt_rejected_without_calling_backend() {
        struct Counting(AtomicU32);
        impl Backend for Counting {
            fn call(&self, _: &ChatRequest) -> Result<String, BackendError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Ok("x".into())
            }
        }
        let backend = Arc::new(Counting(AtomicU32::new(0)));
        let gw = Gateway::new(backend.clone(), RetryPolicy::default(), 0);
        let mut r = req();
        r.user_prompt.clear();
        assert!(matches!(gw.complete(&r), Err(LlmError::InvalidRequest(_))));
        assert_eq!(backend.0.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn gateway_is_shareable_across_threads() {
        fn assert_sync<T: Send + Sync>() {}
        assert_sync::<Gateway>();
    }
}
