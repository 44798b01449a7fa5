//! Provider-agnostic chat client contract.
//!
//! Every request is identified by a content hash over model, temperature,
//! prompt text and attached image. The fixture client replays recorded
//! responses by that hash, which makes full pipeline runs reproducible
//! offline.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::sha256_hex;

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub prompt: String,
    /// PNG bytes sent alongside the prompt.
    pub image_png: Option<Vec<u8>>,
}

impl ChatRequest {
    /// Stable request key used for fixture lookup.
    pub fn hash(&self) -> String {
        let key = json!({
            "model": self.model,
            "temperature": self.temperature,
            "prompt": self.prompt,
            "image_sha256": self.image_png.as_deref().map(sha256_hex),
        });
        sha256_hex(key.to_string().as_bytes())
    }
}

pub trait LlmClient: Send + Sync {
    fn submit(&self, request: &ChatRequest) -> Result<String>;
}

impl<C: LlmClient + ?Sized> LlmClient for &C {
    fn submit(&self, request: &ChatRequest) -> Result<String> {
        (**self).submit(request)
    }
}

impl<C: LlmClient + ?Sized> LlmClient for Box<C> {
    fn submit(&self, request: &ChatRequest) -> Result<String> {
        (**self).submit(request)
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    /// Chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub requests_per_minute: Option<u32>,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 0.2,
            max_retries: 3,
            backoff_base_ms: 1000,
            requests_per_minute: None,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
        }
    }
}

impl fmt::Debug for LlmSettings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmSettings")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("temperature", &self.temperature)
            .field("max_retries", &self.max_retries)
            .field("requests_per_minute", &self.requests_per_minute)
            .finish_non_exhaustive()
    }
}

/// Replace every occurrence of `secret` with a placeholder.
pub fn redact(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if !s.is_empty() => text.replace(s, "[REDACTED]"),
        _ => text.to_string(),
    }
}

/// Replays recorded responses stored as `<request hash>.txt`.
#[derive(Debug, Clone)]
pub struct FixtureClient {
    dir: PathBuf,
}

impl FixtureClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(dir: &Path, request: &ChatRequest) -> PathBuf {
        dir.join(format!("{}.txt", request.hash()))
    }
}

impl LlmClient for FixtureClient {
    fn submit(&self, request: &ChatRequest) -> Result<String> {
        let path = Self::path_for(&self.dir, request);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::FixtureMissing(request.hash()))
            }
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

/// Forwards to an inner client and stores each response as a fixture.
pub struct RecordingClient<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: LlmClient> RecordingClient<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { inner, dir })
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn submit(&self, request: &ChatRequest) -> Result<String> {
        let text = self.inner.submit(request)?;
        let path = FixtureClient::path_for(&self.dir, request);
        fs::write(&path, &text).map_err(|e| Error::io(path, e))?;
        Ok(text)
    }
}

/// Spaces requests evenly to respect a requests-per-minute budget shared by
/// every thread using the limiter.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(rpm: u32) -> Self {
        Self {
            interval: Duration::from_secs(60) / rpm.max(1),
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

/// Retry wrapper: up to `max_retries` extra attempts with exponential
/// backoff, only for errors marked retryable.
pub struct RetryingClient<C> {
    inner: C,
    max_retries: u32,
    backoff_base: Duration,
    limiter: Option<RateLimiter>,
}

impl<C: LlmClient> RetryingClient<C> {
    pub fn new(inner: C, max_retries: u32, backoff_base: Duration) -> Self {
        Self {
            inner,
            max_retries,
            backoff_base,
            limiter: None,
        }
    }

    pub fn with_rate_limit(mut self, requests_per_minute: Option<u32>) -> Self {
        self.limiter = requests_per_minute.map(RateLimiter::per_minute);
        self
    }

    fn backoff(&self, attempt: u32) -> Duration {
        self.backoff_base.saturating_mul(1 << attempt.min(16))
    }
}

impl<C: LlmClient> LlmClient for RetryingClient<C> {
    fn submit(&self, request: &ChatRequest) -> Result<String> {
        let mut attempt = 0;
        loop {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            match self.inner.submit(request) {
                Err(Error::Llm { message, retryable: true }) if attempt < self.max_retries => {
                    let delay = self.backoff(attempt);
                    tracing::warn!(attempt, ?delay, "retrying LLM request: {message}");
                    thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClient")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "[REDACTED]"))
            .finish()
    }
}

impl HttpClient {
    pub fn from_settings(settings: &LlmSettings) -> Result<Self> {
        let api_key = std::env::var(&settings.api_key_env).ok();
        Self::new(&settings.endpoint, api_key, Duration::from_secs(settings.timeout_secs))
    }

    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Llm {
                message: e.to_string(),
                retryable: false,
            })?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            api_key,
            http,
        })
    }

    /// Request body: a single user turn with the prompt and, for step 1, the
    /// base64 image.
    pub fn body(request: &ChatRequest) -> serde_json::Value {
        let mut content = vec![json!({"type": "text", "text": request.prompt})];
        if let Some(png) = &request.image_png {
            let b64 = base64::engine::general_purpose::STANDARD.encode(png);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{b64}")}
            }));
        }
        json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": content}],
        })
    }

    fn fail(&self, message: String, retryable: bool) -> Error {
        Error::Llm {
            message: redact(&message, self.api_key.as_deref()),
            retryable,
        }
    }
}

impl LlmClient for HttpClient {
    fn submit(&self, request: &ChatRequest) -> Result<String> {
        let mut req = self.http.post(&self.endpoint).json(&Self::body(request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| self.fail(e.to_string(), e.is_timeout() || e.is_connect()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| self.fail(e.to_string(), true))?;
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            return Err(self.fail(format!("HTTP {status}: {text}"), retryable));
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| self.fail(format!("bad response body: {e}"), false))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| self.fail("response has no message content".into(), false))
    }
}
