//! Uniform completion interface over HTTP backends and a deterministic
//! mock, with retries, bounded concurrency, and a content-addressed
//! response cache.

mod cache;
mod http;
mod mock;

pub use cache::{CacheStats, ResponseCache};
pub use http::{HttpBackend, HttpBackendConfig};
pub use mock::{prompt_digest, Matcher, MockBackend, MockRule, MockScript};

use std::collections::HashSet;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("transport: {message}")]
    Transport { message: String, transient: bool },
    #[error("http status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("no mock rule matched prompt digest {digest}")]
    MockUnmatched { digest: String },
    #[error("cache: {0}")]
    Cache(String),
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
}

impl LlmError {
    /// Timeouts, connection failures, 429 and 5xx responses are worth
    /// retrying; everything else is permanent.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Transport { transient, .. } => *transient,
            LlmError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }
}

/// A single completion request. Temperature defaults to 0 so runs are
/// reproducible and cacheable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            model_id: model_id.into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 1024,
            stop_sequences: Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("prompt is empty".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be > 0".into()));
        }
        Ok(())
    }
}

/// Model/decoding parameters shared by a batch of requests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestDefaults {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl RequestDefaults {
    pub fn new(model_id: impl Into<String>) -> Self {
        RequestDefaults {
            model_id: model_id.into(),
            temperature: 0.0,
            max_tokens: 1024,
            stop_sequences: Vec::new(),
        }
    }

    pub fn request(&self, prompt: impl Into<String>) -> CompletionRequest {
        CompletionRequest {
            model_id: self.model_id.clone(),
            prompt: prompt.into(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            stop_sequences: self.stop_sequences.clone(),
        }
    }
}

/// Completion text plus provenance: whether it came from the cache, which
/// backend produced it, and how long the call took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub cached: bool,
    pub backend_id: String,
    pub latency_ms: u64,
}

/// Stable content address for a request: a SHA-256 over every field, with
/// length prefixes so no two field layouts can collide.
pub fn cache_key(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    let mut put = |tag: &str, bytes: &[u8]| {
        hasher.update(tag.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    };
    put("model_id", request.model_id.as_bytes());
    put("prompt", request.prompt.as_bytes());
    put("temperature", &request.temperature.to_bits().to_le_bytes());
    put("max_tokens", &request.max_tokens.to_le_bytes());
    for stop in &request.stop_sequences {
        put("stop", stop.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Anything that can turn a request into completion text.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(16))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

/// Counting semaphore bounding in-flight backend calls.
struct Gate {
    permits: Mutex<usize>,
    cv: Condvar,
}

struct GatePermit<'a>(&'a Gate);

impl Gate {
    fn new(permits: usize) -> Self {
        Gate {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        GatePermit(self)
    }
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Per-key lock so concurrent identical requests collapse into a single
/// backend call; the losers read the winner's cache entry.
struct KeyLocks {
    in_flight: Mutex<HashSet<String>>,
    cv: Condvar,
}

struct KeyGuard<'a> {
    locks: &'a KeyLocks,
    key: String,
}

impl KeyLocks {
    fn new() -> Self {
        KeyLocks {
            in_flight: Mutex::new(HashSet::new()),
            cv: Condvar::new(),
        }
    }

    fn lock(&self, key: &str) -> KeyGuard<'_> {
        let mut set = self.in_flight.lock().unwrap();
        while set.contains(key) {
            set = self.cv.wait(set).unwrap();
        }
        set.insert(key.to_string());
        KeyGuard {
            locks: self,
            key: key.to_string(),
        }
    }
}

impl Drop for KeyGuard<'_> {
    fn drop(&mut self) {
        self.locks.in_flight.lock().unwrap().remove(&self.key);
        self.locks.cv.notify_all();
    }
}

/// Completion client: a backend plus retry policy, concurrency bound, and
/// optional response cache. Safe to call from many threads at once.
pub struct Client {
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    gate: Gate,
    flights: KeyLocks,
}

impl Client {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Client {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            gate: Gate::new(4),
            flights: KeyLocks::new(),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, permits: usize) -> Self {
        self.gate = Gate::new(permits);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn cache_stats(&self) -> Option<Result<CacheStats, LlmError>> {
        self.cache.as_ref().map(|c| c.stats())
    }

    /// Complete a request. Deterministic (temperature 0) requests are
    /// served from the cache when possible and written back on miss.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        request.validate()?;
        let started = Instant::now();
        let cacheable = self.cache.is_some() && request.temperature == 0.0;

        if cacheable {
            let key = cache_key(request);
            let cache = self.cache.as_ref().unwrap();
            let _flight = self.flights.lock(&key);
            if let Some(text) = cache.get(&key)? {
                return Ok(CompletionResult {
                    text,
                    cached: true,
                    backend_id: self.backend.id().to_string(),
                    latency_ms: started.elapsed().as_millis() as u64,
                });
            }
            let text = self.call_with_retry(request)?;
            cache.put(&key, request, &text)?;
            return Ok(CompletionResult {
                text,
                cached: false,
                backend_id: self.backend.id().to_string(),
                latency_ms: started.elapsed().as_millis() as u64,
            });
        }

        let text = self.call_with_retry(request)?;
        Ok(CompletionResult {
            text,
            cached: false,
            backend_id: self.backend.id().to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    fn call_with_retry(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let _permit = self.gate.acquire();
        let mut attempt = 0u32;
        loop {
            match self.backend.complete(request) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt < self.retry.max_retries => {
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(LlmError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
}
