use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChatRequest, GatewayError, ModelGateway};

#[derive(Debug, Error)]
pub enum StubScriptError {
    #[error("cannot read stub script {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("stub script syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("stub script entry {index} is malformed ({message}): {entry}")]
    Entry {
        index: usize,
        entry: String,
        message: String,
    },
}

/// How a script entry decides whether it answers a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Matcher {
    /// Final message content equals the value exactly.
    Exact(String),
    /// Value occurs anywhere in the system prompt or messages.
    Substring(String),
    /// Answers exactly one request, in script order.
    Sequence,
    /// Replaces the script's fallback reply.
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubEntry {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub reply: String,
}

/// Ordered matchers with first-match-wins semantics; anything unmatched gets
/// `default_reply`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StubScript {
    pub entries: Vec<StubEntry>,
    pub default_reply: String,
}

impl StubScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = reply.into();
        self
    }

    pub fn exact(mut self, value: impl Into<String>, reply: impl Into<String>) -> Self {
        self.entries.push(StubEntry {
            matcher: Matcher::Exact(value.into()),
            reply: reply.into(),
        });
        self
    }

    pub fn substring(mut self, value: impl Into<String>, reply: impl Into<String>) -> Self {
        self.entries.push(StubEntry {
            matcher: Matcher::Substring(value.into()),
            reply: reply.into(),
        });
        self
    }

    pub fn sequence(mut self, reply: impl Into<String>) -> Self {
        self.entries.push(StubEntry {
            matcher: Matcher::Sequence,
            reply: reply.into(),
        });
        self
    }

    pub fn parse(text: &str) -> Result<Self, StubScriptError> {
        if text.trim().is_empty() {
            return Ok(StubScript::default());
        }
        let raw: Vec<serde_json::Value> =
            serde_json::from_str(text).map_err(|e| StubScriptError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        let mut script = StubScript::default();
        for (index, value) in raw.into_iter().enumerate() {
            let entry: StubEntry =
                serde_json::from_value(value.clone()).map_err(|e| StubScriptError::Entry {
                    index,
                    entry: value.to_string(),
                    message: e.to_string(),
                })?;
            if entry.matcher == Matcher::Default {
                script.default_reply = entry.reply;
            } else {
                script.entries.push(entry);
            }
        }
        Ok(script)
    }
}

pub fn load_stub_script(path: impl AsRef<Path>) -> Result<StubScript, StubScriptError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StubScriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    StubScript::parse(&text)
}

/// Deterministic scripted gateway: identical request sequences produce
/// identical reply sequences.
#[derive(Debug)]
pub struct StubGateway {
    script: StubScript,
    consumed: Mutex<Vec<bool>>,
    calls: AtomicUsize,
    recorded: Option<Mutex<Vec<ChatRequest>>>,
}

impl Default for StubGateway {
    fn default() -> Self {
        Self::new(StubScript::default())
    }
}

impl StubGateway {
    pub fn new(script: StubScript) -> Self {
        let n = script.entries.len();
        StubGateway {
            script,
            consumed: Mutex::new(vec![false; n]),
            calls: AtomicUsize::new(0),
            recorded: None,
        }
    }

    /// Single fixed reply for every request.
    pub fn constant(reply: impl Into<String>) -> Self {
        Self::new(StubScript::default().with_default(reply))
    }

    /// Keeps a copy of every request for later inspection.
    pub fn recording(mut self) -> Self {
        self.recorded = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.recorded
            .as_ref()
            .map(|r| r.lock().expect("stub log poisoned").clone())
            .unwrap_or_default()
    }
}

impl ModelGateway for StubGateway {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(log) = &self.recorded {
            log.lock().expect("stub log poisoned").push(request.clone());
        }
        let mut consumed = self.consumed.lock().expect("stub state poisoned");
        let mut flattened: Option<String> = None;
        for (i, entry) in self.script.entries.iter().enumerate() {
            let hit = match &entry.matcher {
                Matcher::Exact(v) => request.last_content() == v,
                Matcher::Substring(v) => flattened
                    .get_or_insert_with(|| request.flatten())
                    .contains(v.as_str()),
                Matcher::Sequence => !consumed[i],
                Matcher::Default => false,
            };
            if hit {
                if entry.matcher == Matcher::Sequence {
                    consumed[i] = true;
                }
                return Ok(entry.reply.clone());
            }
        }
        Ok(self.script.default_reply.clone())
    }
}
