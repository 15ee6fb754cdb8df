//! The learner flow over the session store. Every operation is synchronous
//! and holds the session's busy flag for its whole duration.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex};

use chrono::Duration;
use coach_core::agent::{next_agent_message, AgentConfig, AgentState};
use coach_core::detection::{annotate_transcript, check_target, check_walk_away};
use coach_core::feedback::{assemble_bundle, FeedbackConfig, FeedbackRequest};
use coach_core::scenarios::SUMMER_SUBLEASE_ID;
use coach_core::{
    extract_price_signal, AnnotationLabel, Condition, ErrorCategory, ExtractionConfig, FeedbackBundle, Money,
    ModelGateway, PreparationSheet, Scenario, Speaker, Transcript, Turn,
};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::config::ServiceConfig;
use crate::session::{questions_for, Phase, ScenarioView, Session, MIN_ANSWER_CHARS};
use crate::store::{SessionStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum CoachError {
    #[error("session is in phase {actual:?}; this request needs {expected}")]
    WrongPhase { expected: &'static str, actual: Phase },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("model gateway unavailable: {0}")]
    GatewayUnavailable(String),
    #[error("answer {index} has {chars} characters; at least {min} are required")]
    TooShortAnswer { index: usize, chars: usize, min: usize },
    #[error("another request for this session is in progress")]
    Conflict,
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl CoachError {
    pub fn code(&self) -> &'static str {
        match self {
            CoachError::WrongPhase { .. } => "WRONG_PHASE",
            CoachError::UnknownScenario(_) => "UNKNOWN_SCENARIO",
            CoachError::NotFound(_) => "NOT_FOUND",
            CoachError::GatewayUnavailable(_) => "GATEWAY_UNAVAILABLE",
            CoachError::TooShortAnswer { .. } => "TOO_SHORT_ANSWER",
            CoachError::Conflict => "CONFLICT",
            CoachError::InvalidInput(_) => "INVALID_INPUT",
            CoachError::Store(_) => "INTERNAL",
        }
    }
}

pub type CoachResult<T> = Result<T, CoachError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageReply {
    pub reply: String,
    pub learner_turn: Turn,
    pub agent_turn: Turn,
    pub deal: Option<Money>,
    pub phase: Phase,
}

/// Marks a session busy until dropped.
struct Busy<'a> {
    set: &'a Mutex<HashSet<String>>,
    id: String,
}

impl Drop for Busy<'_> {
    fn drop(&mut self) {
        self.set.lock().expect("busy set").remove(&self.id);
    }
}

pub struct Coach {
    store: SessionStore,
    scenarios: BTreeMap<String, Scenario>,
    gateway: Arc<dyn ModelGateway>,
    clock: Arc<dyn Clock>,
    cfg: ServiceConfig,
    busy: Mutex<HashSet<String>>,
    assign_lock: Mutex<()>,
}

impl Coach {
    pub fn new(
        cfg: ServiceConfig,
        store: SessionStore,
        scenarios: Vec<Scenario>,
        gateway: Arc<dyn ModelGateway>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Coach {
            store,
            scenarios: scenarios.into_iter().map(|s| (s.id.clone(), s)).collect(),
            gateway,
            clock,
            cfg,
            busy: Mutex::new(HashSet::new()),
            assign_lock: Mutex::new(()),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn scenarios(&self) -> Vec<ScenarioView> {
        self.scenarios.values().map(ScenarioView::from).collect()
    }

    fn claim(&self, id: &str) -> CoachResult<Busy<'_>> {
        if !self.busy.lock().expect("busy set").insert(id.to_owned()) {
            return Err(CoachError::Conflict);
        }
        Ok(Busy { set: &self.busy, id: id.to_owned() })
    }

    /// Loads a session, closing it first if it sat idle mid-negotiation.
    fn load(&self, id: &str) -> CoachResult<Session> {
        let mut s = self.store.get(id)?.ok_or_else(|| CoachError::NotFound(id.to_owned()))?;
        if self.expire_if_idle(&mut s) {
            self.store.put(&s)?;
        }
        Ok(s)
    }

    fn expire_if_idle(&self, s: &mut Session) -> bool {
        let now = self.clock.now();
        if s.phase != Phase::Negotiating || now - s.updated_at <= Duration::minutes(self.cfg.idle_timeout_minutes) {
            return false;
        }
        tracing::info!(session = %s.id, "closing idle negotiation");
        s.abandoned = true;
        s.transcript.deal = None;
        s.transcript.duration_seconds = negotiation_seconds(&s.transcript, s.updated_at);
        s.advance(now);
        true
    }

    /// Closes every idle negotiation; returns how many were closed.
    pub fn sweep_idle(&self) -> CoachResult<usize> {
        let mut closed = 0;
        for id in self.store.ids()? {
            let Ok(_busy) = self.claim(&id) else { continue };
            if let Some(mut s) = self.store.get(&id)? {
                if self.expire_if_idle(&mut s) {
                    self.store.put(&s)?;
                    closed += 1;
                }
            }
        }
        Ok(closed)
    }

    /// Reads a session. While another request holds it, returns the last
    /// stored state instead of failing.
    pub fn get_session(&self, id: &str) -> CoachResult<Session> {
        match self.claim(id) {
            Ok(_busy) => self.load(id),
            Err(_) => self.store.get(id)?.ok_or_else(|| CoachError::NotFound(id.to_owned())),
        }
    }

    fn new_session(&self, scenario: &Scenario, condition: Condition, seed: u64, trial: u8) -> CoachResult<Session> {
        let agent_state = AgentState::new(scenario, seed, self.cfg.convergence_turn)
            .map_err(|e| CoachError::InvalidInput(e.to_string()))?;
        let now = self.clock.now();
        Ok(Session {
            id: uuid::Uuid::new_v4().to_string(),
            condition,
            trial,
            previous_session: None,
            second_trial: None,
            feedback_enabled: trial == 1,
            seed,
            scenario: scenario.clone(),
            prep: None,
            prep_labels: Vec::new(),
            transcript: Transcript::new(&scenario.id),
            agent_state,
            phase: Phase::AwaitingPrep,
            feedback: None,
            reflection_questions: questions_for(condition, trial, self.cfg.control_questions),
            reflection: None,
            survey: None,
            abandoned: false,
            created_at: now,
            updated_at: now,
        })
    }

    pub fn create_session(&self, scenario_id: &str, condition: Condition, seed: Option<u64>) -> CoachResult<Session> {
        let scenario =
            self.scenarios.get(scenario_id).ok_or_else(|| CoachError::UnknownScenario(scenario_id.to_owned()))?;
        let seed = seed.unwrap_or_else(rand::random);
        let s = self.new_session(scenario, condition, seed, 1)?;
        self.store.put(&s)?;
        Ok(s)
    }

    pub fn submit_preparation(&self, id: &str, prep: PreparationSheet) -> CoachResult<Session> {
        let _busy = self.claim(id)?;
        let mut s = self.load(id)?;
        expect_phase(&s, Phase::AwaitingPrep, "AwaitingPrep")?;
        prep.validate().map_err(|e| CoachError::InvalidInput(e.to_string()))?;
        let mut labels = vec![AnnotationLabel::applicable(
            ErrorCategory::StrategicWalkAway,
            None,
            check_walk_away(&prep, &s.scenario),
        )];
        labels.push(match check_target(&prep, &s.scenario) {
            Ok(v) => AnnotationLabel::applicable(ErrorCategory::StrategicTarget, None, v),
            Err(_) => AnnotationLabel::not_applicable(ErrorCategory::StrategicTarget, None),
        });
        s.prep = Some(prep);
        s.prep_labels = labels;
        s.advance(self.clock.now());
        self.store.put(&s)?;
        Ok(s)
    }

    pub fn post_message(&self, id: &str, text: &str) -> CoachResult<MessageReply> {
        let _busy = self.claim(id)?;
        let mut s = self.load(id)?;
        expect_phase(&s, Phase::Negotiating, "Negotiating")?;
        let text = text.trim();
        if text.is_empty() {
            return Err(CoachError::InvalidInput("message text is empty".into()));
        }
        if text.chars().count() > self.cfg.max_message_chars {
            return Err(CoachError::InvalidInput(format!(
                "message is longer than {} characters",
                self.cfg.max_message_chars
            )));
        }
        let gw = self.gateway.as_ref();
        let signal = extract_price_signal(text, &s.transcript.turns, gw, &ExtractionConfig::default())
            .map_err(|e| CoachError::GatewayUnavailable(e.to_string()))?;
        let learner_index = s.transcript.push(Speaker::Learner, text, signal, self.clock.now());

        let agent_cfg = AgentConfig { convergence_turn: self.cfg.convergence_turn, voice: self.cfg.agent_voice };
        let (reply, next_state) = next_agent_message(&s.agent_state, &s.scenario, &s.transcript, gw, &agent_cfg)
            .map_err(|e| CoachError::GatewayUnavailable(e.to_string()))?;
        let now = self.clock.now();
        let agent_index = s.transcript.push(Speaker::Agent, reply.text.clone(), reply.signal, now);
        s.agent_state = next_state;
        s.updated_at = now;
        if let Some(price) = reply.deal {
            s.transcript.deal = Some(price);
            s.transcript.duration_seconds = negotiation_seconds(&s.transcript, now);
            s.advance(now);
        }
        self.store.put(&s)?;
        Ok(MessageReply {
            reply: reply.text,
            learner_turn: s.transcript.turns[learner_index].clone(),
            agent_turn: s.transcript.turns[agent_index].clone(),
            deal: s.transcript.deal,
            phase: s.phase,
        })
    }

    /// Builds the bundle on first call in FeedbackReady and moves on to
    /// reflection; later calls return the cached bundle.
    pub fn get_feedback(&self, id: &str) -> CoachResult<FeedbackBundle> {
        let _busy = self.claim(id)?;
        let mut s = self.load(id)?;
        if s.phase < Phase::FeedbackReady {
            return Err(CoachError::WrongPhase { expected: "FeedbackReady or later", actual: s.phase });
        }
        if let Some(b) = &s.feedback {
            return Ok(b.clone());
        }
        let bundle = self.build_feedback(&s);
        s.feedback = Some(bundle.clone());
        if s.phase == Phase::FeedbackReady {
            s.advance(self.clock.now());
        }
        self.store.put(&s)?;
        Ok(bundle)
    }

    fn build_feedback(&self, s: &Session) -> FeedbackBundle {
        if !s.feedback_enabled || s.condition == Condition::NoFeedback {
            return FeedbackBundle::default();
        }
        let gw = self.gateway.as_ref();
        let labels = match s.condition {
            Condition::Ace => annotate_transcript(&s.transcript, s.prep.as_ref(), &s.scenario, gw).labels,
            _ => Vec::new(),
        };
        let request = FeedbackRequest {
            transcript: &s.transcript,
            labels: &labels,
            prep: s.prep.as_ref(),
            scenario: &s.scenario,
            condition: s.condition,
        };
        assemble_bundle(&request, gw, &FeedbackConfig { prep_mode: self.cfg.prep_feedback })
    }

    pub fn submit_reflection(&self, id: &str, answers: Vec<String>) -> CoachResult<Session> {
        let _busy = self.claim(id)?;
        let mut s = self.load(id)?;
        expect_phase(&s, Phase::ReflectionPending, "ReflectionPending")?;
        if answers.len() != s.reflection_questions.len() {
            return Err(CoachError::InvalidInput(format!(
                "expected {} answers, got {}",
                s.reflection_questions.len(),
                answers.len()
            )));
        }
        for (index, a) in answers.iter().enumerate() {
            let chars = a.trim().chars().count();
            if chars < MIN_ANSWER_CHARS {
                return Err(CoachError::TooShortAnswer { index, chars, min: MIN_ANSWER_CHARS });
            }
        }
        s.reflection = Some(answers);
        s.advance(self.clock.now());
        self.store.put(&s)?;
        Ok(s)
    }

    /// Creates (once) the trial-two session on the sublease scenario. The
    /// condition carries over; feedback is always off.
    pub fn start_second_trial(&self, id: &str) -> CoachResult<Session> {
        let _busy = self.claim(id)?;
        let mut first = self.load(id)?;
        if first.trial != 1 {
            return Err(CoachError::InvalidInput("only a trial-one session can start a second trial".into()));
        }
        expect_phase(&first, Phase::Done, "Done")?;
        if let Some(existing) = &first.second_trial {
            return self.store.get(existing)?.ok_or_else(|| CoachError::NotFound(existing.clone()));
        }
        let scenario = self
            .scenarios
            .get(SUMMER_SUBLEASE_ID)
            .ok_or_else(|| CoachError::UnknownScenario(SUMMER_SUBLEASE_ID.to_owned()))?;
        let mut second = self.new_session(scenario, first.condition, first.seed.wrapping_add(1), 2)?;
        second.previous_session = Some(first.id.clone());
        first.second_trial = Some(second.id.clone());
        first.updated_at = second.created_at;
        self.store.put_all(&[&second, &first])?;
        Ok(second)
    }

    pub fn submit_survey(&self, id: &str, answers: serde_json::Value) -> CoachResult<Session> {
        let _busy = self.claim(id)?;
        let mut s = self.load(id)?;
        expect_phase(&s, Phase::Done, "Done")?;
        s.survey = Some(answers);
        s.updated_at = self.clock.now();
        self.store.put(&s)?;
        Ok(s)
    }

    /// Balanced assignment: a condition with the fewest assignments so far,
    /// ties broken by a seeded draw.
    pub fn assign_condition(&self) -> CoachResult<Condition> {
        let _guard = self.assign_lock.lock().expect("assignment lock");
        let mut counts = Vec::new();
        for c in Condition::ALL {
            counts.push((c, self.store.counter(counter_name(c))?));
        }
        let least = counts.iter().map(|(_, n)| *n).min().unwrap_or(0);
        let tied: Vec<Condition> = counts.iter().filter(|(_, n)| *n == least).map(|(c, _)| *c).collect();
        let total: u64 = counts.iter().map(|(_, n)| n).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.assignment_seed.wrapping_add(total));
        let pick = *tied.choose(&mut rng).expect("at least one condition");
        self.store.bump(counter_name(pick))?;
        Ok(pick)
    }
}

fn counter_name(c: Condition) -> &'static str {
    match c {
        Condition::Ace => "assigned:ACE",
        Condition::OtherFeedback => "assigned:OtherFeedback",
        Condition::NoFeedback => "assigned:NoFeedback",
    }
}

fn expect_phase(s: &Session, phase: Phase, name: &'static str) -> CoachResult<()> {
    if s.phase == phase {
        Ok(())
    } else {
        Err(CoachError::WrongPhase { expected: name, actual: s.phase })
    }
}

fn negotiation_seconds(t: &Transcript, end: chrono::DateTime<chrono::Utc>) -> f64 {
    t.turns.first().map_or(0.0, |first| (end - first.timestamp).num_milliseconds() as f64 / 1000.0)
}
