use std::path::{Path, PathBuf};

use coach_core::agent::{AgentVoice, DEFAULT_CONVERGENCE_TURN};
use coach_core::feedback::PrepFeedbackMode;
use coach_core::gateway::{GatewayConfig, GatewayMode};
use serde::{Deserialize, Serialize};

/// Which question set NoFeedback sessions answer after trial one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlQuestions {
    /// Same reflection questions as the feedback conditions.
    #[default]
    Reflection,
    /// Unrelated filler questions of similar workload.
    Filler,
}

/// Gateway settings; anything left unset falls back to the `ACE_GATEWAY_*`
/// environment variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySection {
    pub mode: Option<GatewayMode>,
    pub url: Option<String>,
    pub model: Option<String>,
    pub stub_script: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub listen: String,
    pub store_path: PathBuf,
    /// Directory of scenario JSON files; built-in scenarios when unset.
    pub scenario_dir: Option<PathBuf>,
    pub idle_timeout_minutes: i64,
    pub convergence_turn: u32,
    pub agent_voice: AgentVoice,
    pub prep_feedback: PrepFeedbackMode,
    pub control_questions: ControlQuestions,
    /// Seed for the balanced condition-assignment helper.
    pub assignment_seed: u64,
    pub max_message_chars: usize,
    pub gateway: GatewaySection,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            store_path: PathBuf::from("coach-sessions.redb"),
            scenario_dir: None,
            idle_timeout_minutes: 60,
            convergence_turn: DEFAULT_CONVERGENCE_TURN,
            agent_voice: AgentVoice::Template,
            prep_feedback: PrepFeedbackMode::Template,
            control_questions: ControlQuestions::Reflection,
            assignment_seed: 0,
            max_message_chars: 2000,
            gateway: GatewaySection::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_toml(&text)?)
    }

    /// Environment settings with this file's gateway section laid on top.
    pub fn gateway_config(&self) -> Result<GatewayConfig, coach_core::GatewayError> {
        let mut cfg = GatewayConfig::from_env()?;
        let g = &self.gateway;
        if let Some(mode) = g.mode {
            cfg.mode = mode;
        }
        if g.url.is_some() {
            cfg.url = g.url.clone();
        }
        if g.model.is_some() {
            cfg.model = g.model.clone();
        }
        if g.stub_script.is_some() {
            cfg.stub_script = g.stub_script.clone();
        }
        Ok(cfg)
    }
}
