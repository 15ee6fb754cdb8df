use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{CallSite, ChatRequest, GatewayError, MessageRole, ModelGateway};

#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Full URL of the chat-completions endpoint.
    pub url: String,
    pub api_key: Option<String>,
    pub default_model: String,
    pub site_models: HashMap<CallSite, String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            url: "https://api.openai.com/v1/chat/completions".into(),
            api_key: None,
            default_model: "gpt-4o".into(),
            site_models: HashMap::new(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            max_in_flight: 4,
        }
    }
}

/// Counting semaphore capping in-flight calls; excess callers block.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            available: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut slots = self.available.lock().expect("limiter poisoned");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("limiter poisoned");
        }
        *slots -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("limiter poisoned") += 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Retryable(String),
    Fatal(GatewayError),
}

pub struct LiveGateway {
    config: LiveConfig,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl LiveGateway {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        if config.url.trim().is_empty() {
            return Err(GatewayError::Misconfigured("gateway URL is empty".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter::new(config.max_in_flight);
        Ok(LiveGateway {
            config,
            agent,
            limiter,
        })
    }

    fn model_for(&self, request: &ChatRequest) -> String {
        if !request.model_name.is_empty() {
            return request.model_name.clone();
        }
        self.config
            .site_models
            .get(&request.call_site)
            .cloned()
            .unwrap_or_else(|| self.config.default_model.clone())
    }

    fn payload(&self, request: &ChatRequest) -> Value {
        let mut messages = Vec::with_capacity(request.messages.len() + 1);
        if !request.system_prompt.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_prompt}));
        }
        for m in &request.messages {
            let role = match m.role {
                MessageRole::User => "user",
                MessageRole::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": m.content}));
        }
        json!({
            "model": self.model_for(request),
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }

    fn attempt(&self, key: &str, body: &str) -> Result<String, Attempt> {
        let mut response = self
            .agent
            .post(&self.config.url)
            .header("Authorization", &format!("Bearer {key}"))
            .content_type("application/json")
            .send(body)
            .map_err(|e| Attempt::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retryable(e.to_string()))?;
        match status {
            200..=299 => parse_completion(&text).map_err(Attempt::Fatal),
            401 | 403 => Err(Attempt::Fatal(GatewayError::Misconfigured(format!(
                "provider rejected credentials (HTTP {status})"
            )))),
            408 | 429 | 500..=599 => Err(Attempt::Retryable(format!("HTTP {status}"))),
            _ => Err(Attempt::Fatal(GatewayError::BadResponse(format!(
                "HTTP {status}: {}",
                truncate(&text, 200)
            )))),
        }
    }
}

impl ModelGateway for LiveGateway {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let key = self
            .config
            .api_key
            .as_deref()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::Misconfigured("no API key for live mode".into()))?;
        let body = self.payload(request).to_string();
        let _permit = self.limiter.acquire();

        let mut backoff = self.config.initial_backoff;
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                debug!(attempt, ?backoff, "retrying model call");
                thread::sleep(backoff);
                backoff = backoff.saturating_mul(2);
            }
            match self.attempt(key, &body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(msg)) => {
                    warn!(attempt, error = %msg, "model call failed");
                    last_error = msg;
                }
            }
        }
        Err(GatewayError::Unavailable(format!(
            "{} attempts failed; last error: {last_error}",
            self.config.max_retries + 1
        )))
    }
}

/// Pulls `choices[0].message.content` out of a chat-completions payload.
pub(crate) fn parse_completion(body: &str) -> Result<String, GatewayError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| GatewayError::BadResponse(format!("invalid JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| {
            GatewayError::BadResponse(format!(
                "missing choices[0].message.content in {}",
                truncate(body, 200)
            ))
        })
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
