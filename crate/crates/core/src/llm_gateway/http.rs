//! Blocking HTTP clients for chat-completions and embeddings endpoints.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::embedding::{EmbeddingProvider, EmbeddingVector};
use super::{ChatRequest, CompletionClient};
use crate::error::GatewayError;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "RESUMETUNE_API_KEY";

#[derive(Clone, Default, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .map(Self)
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_id: String,
    #[serde(skip)]
    pub api_key: Option<ApiKey>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_parallel_requests: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_dir: Option<PathBuf>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_id: model_id.into(),
            api_key: ApiKey::from_env(),
            timeout_secs: 120.0,
            max_retries: 3,
            max_parallel_requests: 4,
            transcript_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.base_url.trim().is_empty() {
            return Err(GatewayError::Config("base_url is empty".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(GatewayError::Config("timeout must be positive".into()));
        }
        if self.max_parallel_requests == 0 {
            return Err(GatewayError::Config("max_parallel_requests must be >= 1".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Hash of the endpoint identity; never includes the API key.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.base_url.as_bytes());
        h.update([0]);
        h.update(self.model_id.as_bytes());
        hex::encode(h.finalize())
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), route)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl RetryPolicy {
    pub fn new(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }

    /// Delay before retry number `retry` (1-based): doubling, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Run `op` until it succeeds, fails with a non-retryable error, or the
/// retry budget is spent. `op` receives the 1-based attempt number.
pub fn retry_with_backoff<T>(
    policy: &RetryPolicy,
    mut op: impl FnMut(u32) -> Result<T, GatewayError>,
    mut sleep: impl FnMut(Duration),
) -> Result<T, GatewayError> {
    let mut attempt = 1;
    loop {
        match op(attempt) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt <= policy.max_retries => {
                let delay = policy.delay(attempt);
                log::warn!("attempt {attempt} failed ({e}); retrying in {delay:?}");
                sleep(delay);
                attempt += 1;
            }
            Err(e) => return Err(with_attempts(e, attempt)),
        }
    }
}

fn with_attempts(e: GatewayError, attempts: u32) -> GatewayError {
    match e {
        GatewayError::Transport { message, .. } => GatewayError::Transport { attempts, message },
        GatewayError::Timeout { .. } => GatewayError::Timeout { attempts },
        other => other,
    }
}

/// Counting semaphore capping in-flight requests.
#[derive(Debug)]
pub struct RequestLimiter {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a RequestLimiter);

impl RequestLimiter {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

fn map_ureq(e: ureq::Error) -> GatewayError {
    match e {
        ureq::Error::Timeout(_) => GatewayError::Timeout { attempts: 1 },
        other => GatewayError::Transport {
            attempts: 1,
            message: other.to_string(),
        },
    }
}

struct JsonEndpoint {
    config: EndpointConfig,
    agent: ureq::Agent,
    limiter: RequestLimiter,
    seq: AtomicU64,
}

impl JsonEndpoint {
    fn new(config: EndpointConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        if let Some(dir) = &config.transcript_dir {
            fs::create_dir_all(dir)
                .map_err(|e| GatewayError::Config(format!("transcript dir {}: {e}", dir.display())))?;
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            limiter: RequestLimiter::new(config.max_parallel_requests),
            config,
            agent,
            seq: AtomicU64::new(0),
        })
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        let _permit = self.limiter.acquire();
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {}", key.expose()));
        }
        let mut resp = req.send(body.to_string()).map_err(map_ureq)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_ureq)?;
        self.log_transcript(url, body, status, &text);
        if !(200..300).contains(&status) {
            return Err(GatewayError::Status { status, body: text });
        }
        serde_json::from_str(&text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))
    }

    fn post(&self, route: &str, body: &Value) -> Result<Value, GatewayError> {
        let url = self.config.url(route);
        let policy = RetryPolicy::new(self.config.max_retries);
        retry_with_backoff(&policy, |_| self.post_once(&url, body), std::thread::sleep)
    }

    fn log_transcript(&self, url: &str, request: &Value, status: u16, response: &str) {
        let Some(dir) = &self.config.transcript_dir else {
            return;
        };
        let n = self.seq.fetch_add(1, Ordering::Relaxed);
        let entry = json!({ "url": url, "request": request, "status": status, "response": response });
        let path = dir.join(format!("{n:06}.json"));
        if let Err(e) = fs::write(&path, entry.to_string()) {
            log::warn!("could not write transcript {}: {e}", path.display());
        }
    }
}

/// Chat-completions client (`POST {base_url}/chat/completions`).
pub struct HttpCompletionClient {
    endpoint: JsonEndpoint,
}

impl HttpCompletionClient {
    pub fn new(config: EndpointConfig) -> Result<Self, GatewayError> {
        Ok(Self {
            endpoint: JsonEndpoint::new(config)?,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.endpoint.config
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let body = serde_json::to_value(request).expect("request serializes");
        let resp = self.endpoint.post("chat/completions", &body)?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))
    }
}

/// Embeddings client (`POST {base_url}/embeddings`).
pub struct RemoteEmbedder {
    endpoint: JsonEndpoint,
    dimension: usize,
}

impl RemoteEmbedder {
    pub fn new(config: EndpointConfig, dimension: usize) -> Result<Self, GatewayError> {
        if dimension == 0 {
            return Err(GatewayError::Config("embedding dimension must be positive".into()));
        }
        Ok(Self {
            endpoint: JsonEndpoint::new(config)?,
            dimension,
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        let body = json!({ "model": self.endpoint.config.model_id, "input": text });
        let resp = self.endpoint.post("embeddings", &body)?;
        let values: Vec<f64> = resp["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| GatewayError::MalformedResponse("missing data[0].embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| GatewayError::MalformedResponse("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if values.len() != self.dimension {
            return Err(GatewayError::DimensionMismatch {
                expected: self.dimension,
                got: values.len(),
            });
        }
        Ok(EmbeddingVector { values })
    }

    fn describe(&self) -> String {
        format!(
            "remote:{}@{}/{}",
            self.endpoint.config.model_id, self.endpoint.config.base_url, self.dimension
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn transport() -> GatewayError {
        GatewayError::Transport {
            attempts: 1,
            message: "connection reset".into(),
        }
    }

    #[test]
    fn retries_stop_at_budget() {
        let calls = Cell::new(0);
        let mut slept = Vec::new();
        let policy = RetryPolicy::new(2);
        let res: Result<(), _> = retry_with_backoff(
            &policy,
            |_| {
                calls.set(calls.get() + 1);
                Err(transport())
            },
            |d| slept.push(d),
        );
        assert_eq!(calls.get(), 3);
        assert_eq!(slept, vec![Duration::from_millis(250), Duration::from_millis(500)]);
        assert!(matches!(res, Err(GatewayError::Transport { attempts: 3, .. })));
    }

    #[test]
    fn non_retryable_errors_fail_fast() {
        let calls = Cell::new(0);
        let res: Result<(), _> = retry_with_backoff(
            &RetryPolicy::new(5),
            |_| {
                calls.set(calls.get() + 1);
                Err(GatewayError::Status {
                    status: 400,
                    body: "bad".into(),
                })
            },
            |_| {},
        );
        assert_eq!(calls.get(), 1);
        assert!(res.is_err());
    }

    #[test]
    fn recovers_after_transient_failure() {
        let res = retry_with_backoff(
            &RetryPolicy::new(3),
            |attempt| if attempt < 3 { Err(GatewayError::Timeout { attempts: 1 }) } else { Ok(attempt) },
            |_| {},
        );
        assert_eq!(res.unwrap(), 3);
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy::new(50);
        assert_eq!(p.delay(1), Duration::from_millis(250));
        assert_eq!(p.delay(3), Duration::from_secs(1));
        assert_eq!(p.delay(40), Duration::from_secs(8));
    }

    #[test]
    fn config_validation_and_redaction() {
        let mut c = EndpointConfig::new("http://localhost:1/v1", "m");
        c.api_key = Some(ApiKey::new("sk-secret"));
        assert!(!format!("{c:?}").contains("sk-secret"));
        assert!(!serde_json::to_string(&c).unwrap().contains("sk-secret"));
        assert!(c.validate().is_ok());
        c.max_parallel_requests = 0;
        assert!(c.validate().is_err());
        c.max_parallel_requests = 1;
        c.timeout_secs = 0.0;
        assert!(c.validate().is_err());
        assert_eq!(c.url("chat/completions"), "http://localhost:1/v1/chat/completions");
    }

    #[test]
    fn limiter_caps_concurrency() {
        use std::sync::atomic::AtomicUsize;
        let limiter = RequestLimiter::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = limiter.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
