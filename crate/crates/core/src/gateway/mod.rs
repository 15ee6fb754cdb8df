//! The single port through which every model call flows.
//!
//! Two implementations ship: [`LiveGateway`] speaks the JSON chat-completions
//! wire shape over HTTP, and [`StubGateway`] replays a scripted set of
//! replies so tests and offline runs are deterministic.

mod live;
mod stub;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use live::{LiveConfig, LiveGateway};
pub use stub::{load_stub_script, Matcher, StubEntry, StubGateway, StubScript, StubScriptError};

/// Upper bound on `max_tokens` accepted by request validation.
pub const MAX_TOKENS_CEILING: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("model gateway unavailable: {0}")]
    Unavailable(String),
    #[error("malformed model response: {0}")]
    BadResponse(String),
    #[error("gateway misconfigured: {0}")]
    Misconfigured(String),
}

/// Which component issued a request. Live gateways may route call sites to
/// different model names; temperatures default per site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallSite {
    Extraction,
    Classifier,
    Agent,
    Feedback,
    Simulation,
}

impl CallSite {
    pub fn default_temperature(self) -> f64 {
        match self {
            CallSite::Extraction | CallSite::Classifier => 0.0,
            CallSite::Agent | CallSite::Feedback | CallSite::Simulation => 0.7,
        }
    }

    pub fn default_max_tokens(self) -> u32 {
        match self {
            CallSite::Extraction | CallSite::Classifier => 32,
            CallSite::Agent | CallSite::Simulation => 400,
            CallSite::Feedback => 800,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub call_site: CallSite,
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Empty means "whatever the gateway maps this call site to".
    pub model_name: String,
}

impl ChatRequest {
    pub fn new(call_site: CallSite, system_prompt: impl Into<String>) -> Self {
        ChatRequest {
            call_site,
            system_prompt: system_prompt.into(),
            messages: Vec::new(),
            temperature: call_site.default_temperature(),
            max_tokens: call_site.default_max_tokens(),
            model_name: String::new(),
        }
    }

    pub fn user(mut self, content: impl Into<String>) -> Self {
        self.messages.push(ChatMessage {
            role: MessageRole::User,
            content: content.into(),
        });
        self
    }

    pub fn assistant(mut self, content: impl Into<String>) -> Self {
        self.messages.push(ChatMessage {
            role: MessageRole::Assistant,
            content: content.into(),
        });
        self
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_tokens == 0 || self.max_tokens > MAX_TOKENS_CEILING {
            return Err(GatewayError::Misconfigured(format!(
                "max_tokens must be in 1..={MAX_TOKENS_CEILING}, got {}",
                self.max_tokens
            )));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::Misconfigured(format!(
                "temperature must be nonnegative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Content of the final message, or the system prompt for a bare request.
    pub fn last_content(&self) -> &str {
        self.messages
            .last()
            .map(|m| m.content.as_str())
            .unwrap_or(&self.system_prompt)
    }

    /// System prompt and every message joined by newlines.
    pub fn flatten(&self) -> String {
        let mut out = self.system_prompt.clone();
        for m in &self.messages {
            out.push('\n');
            out.push_str(&m.content);
        }
        out
    }
}

pub trait ModelGateway: Send + Sync {
    /// Returns the text of the model's first reply message.
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

impl<G: ModelGateway + ?Sized> ModelGateway for Arc<G> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<G: ModelGateway + ?Sized> ModelGateway for Box<G> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// Gateway whose every call fails as unavailable.
#[derive(Debug, Default, Clone, Copy)]
pub struct UnavailableGateway;

impl ModelGateway for UnavailableGateway {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        Err(GatewayError::Unavailable("no model backend configured".into()))
    }
}

/// Gateway backed by a closure; handy for programmatic scripting.
pub struct FnGateway<F>(pub F);

impl<F> ModelGateway for FnGateway<F>
where
    F: Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        (self.0)(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    Live,
    Stub,
}

impl std::str::FromStr for GatewayMode {
    type Err = GatewayError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(GatewayMode::Live),
            "stub" => Ok(GatewayMode::Stub),
            other => Err(GatewayError::Misconfigured(format!(
                "unknown gateway mode {other:?} (expected live or stub)"
            ))),
        }
    }
}

/// Gateway selection as read from the `ACE_GATEWAY_*` / `ACE_STUB_SCRIPT`
/// environment variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    pub url: Option<String>,
    pub key: Option<String>,
    pub model: Option<String>,
    pub stub_script: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            mode: GatewayMode::Stub,
            url: None,
            key: None,
            model: None,
            stub_script: None,
        }
    }
}

impl GatewayConfig {
    pub fn from_env() -> Result<Self, GatewayError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, GatewayError> {
        let non_empty = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        let mode = match non_empty("ACE_GATEWAY_MODE") {
            Some(m) => m.parse()?,
            None => GatewayMode::Stub,
        };
        Ok(GatewayConfig {
            mode,
            url: non_empty("ACE_GATEWAY_URL"),
            key: non_empty("ACE_GATEWAY_KEY"),
            model: non_empty("ACE_GATEWAY_MODEL"),
            stub_script: non_empty("ACE_STUB_SCRIPT").map(PathBuf::from),
        })
    }

    pub fn build(&self) -> Result<Arc<dyn ModelGateway>, GatewayError> {
        match self.mode {
            GatewayMode::Stub => {
                let script = match &self.stub_script {
                    Some(path) => load_stub_script(path)
                        .map_err(|e| GatewayError::Misconfigured(e.to_string()))?,
                    None => StubScript::default(),
                };
                Ok(Arc::new(StubGateway::new(script)))
            }
            GatewayMode::Live => {
                let mut cfg = LiveConfig::default();
                if let Some(url) = &self.url {
                    cfg.url = url.clone();
                }
                if let Some(model) = &self.model {
                    cfg.default_model = model.clone();
                }
                cfg.api_key = self.key.clone();
                Ok(Arc::new(LiveGateway::new(cfg)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_max_tokens_is_misconfigured() {
        let req = ChatRequest::new(CallSite::Extraction, "sys").user("hi").max_tokens(0);
        let err = StubGateway::new(StubScript::default()).complete(&req).unwrap_err();
        assert!(matches!(err, GatewayError::Misconfigured(_)));
    }

    #[test]
    fn temperatures_default_by_site() {
        assert_eq!(ChatRequest::new(CallSite::Classifier, "").temperature, 0.0);
        assert_eq!(ChatRequest::new(CallSite::Agent, "").temperature, 0.7);
    }

    #[test]
    fn config_from_lookup() {
        let cfg = GatewayConfig::from_lookup(|k| match k {
            "ACE_GATEWAY_MODE" => Some("live".into()),
            "ACE_GATEWAY_URL" => Some("http://127.0.0.1:9/v1/chat/completions".into()),
            "ACE_GATEWAY_MODEL" => Some("m".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.mode, GatewayMode::Live);
        assert_eq!(cfg.key, None);
        assert!(GatewayConfig::from_lookup(|_| Some("bogus".into())).is_err());
        assert_eq!(GatewayConfig::from_lookup(|_| None).unwrap().mode, GatewayMode::Stub);
    }

    #[test]
    fn unavailable_gateway_fails() {
        let req = ChatRequest::new(CallSite::Feedback, "x").user("y");
        assert!(matches!(
            UnavailableGateway.complete(&req),
            Err(GatewayError::Unavailable(_))
        ));
    }
}
