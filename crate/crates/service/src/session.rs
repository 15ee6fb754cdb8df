use chrono::{DateTime, Utc};
use coach_core::agent::AgentState;
use coach_core::{AnnotationLabel, Condition, FeedbackBundle, Money, PreparationSheet, Role, Scenario, Transcript};
use serde::{Deserialize, Serialize};

use crate::config::ControlQuestions;

pub const MIN_ANSWER_CHARS: usize = 30;

pub const REFLECTION_QUESTIONS: [&str; 4] = [
    "Based on the feedback, what should be your walkaway point, your target point, and your opening point, respectively?",
    "Based on the feedback, what can be compelling rationale for your offers and useful questions to elicit information or persuade the seller to make concessions?",
    "What tips about your performance did you receive about the early phase of your negotiation conversation? Accordingly, what would you strive to do next time?",
    "What tips about your performance did you receive about the later phase of you negotiation conversation? Accordingly, what would you strive to do next time?",
];

pub const FILLER_QUESTIONS: [&str; 4] = [
    "If you want to develop a new hobby, what should be your first step? Please write down a tactical plan.",
    "Can you think of any useful tactics to learn a new foreign language?",
    "If you aim to improve your performance at work, what should you do? Please write down a tactical plan.",
    "In applying to graduate school, what are some steps that a student can take to raise their GPA?",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    AwaitingPrep,
    Negotiating,
    FeedbackReady,
    ReflectionPending,
    Done,
}

impl Phase {
    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::AwaitingPrep => Some(Phase::Negotiating),
            Phase::Negotiating => Some(Phase::FeedbackReady),
            Phase::FeedbackReady => Some(Phase::ReflectionPending),
            Phase::ReflectionPending => Some(Phase::Done),
            Phase::Done => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub condition: Condition,
    pub trial: u8,
    /// Trial-one session this trial-two session follows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_session: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_trial: Option<String>,
    pub feedback_enabled: bool,
    pub seed: u64,
    pub scenario: Scenario,
    pub prep: Option<PreparationSheet>,
    /// Walk-away and target labels, computed at submission and withheld
    /// until feedback.
    #[serde(default)]
    pub prep_labels: Vec<AnnotationLabel>,
    pub transcript: Transcript,
    pub agent_state: AgentState,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackBundle>,
    pub reflection_questions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<serde_json::Value>,
    /// Closed for inactivity before a deal.
    #[serde(default)]
    pub abandoned: bool,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl Session {
    /// Advances exactly one phase. Callers check the current phase first.
    pub(crate) fn advance(&mut self, now: DateTime<Utc>) {
        self.phase = self.phase.next().expect("advance past Done");
        self.updated_at = now;
    }
}

pub fn questions_for(condition: Condition, trial: u8, control: ControlQuestions) -> Vec<String> {
    let set: &[&str] = match (trial, condition, control) {
        (2.., _, _) => &[],
        (_, Condition::NoFeedback, ControlQuestions::Filler) => &FILLER_QUESTIONS,
        _ => &REFLECTION_QUESTIONS,
    };
    set.iter().map(|q| (*q).to_owned()).collect()
}

/// What the learner may see of a scenario: no counterpart reservation and
/// no agent instructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioView {
    pub id: String,
    pub item_description: String,
    pub market_min: Money,
    pub market_max: Money,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<Money>,
    pub learner_role: Role,
}

impl From<&Scenario> for ScenarioView {
    fn from(s: &Scenario) -> Self {
        ScenarioView {
            id: s.id.clone(),
            item_description: s.item_description.clone(),
            market_min: s.market_min,
            market_max: s.market_max,
            budget: s.budget,
            learner_role: s.learner_role,
        }
    }
}

/// Learner-facing session JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub condition: Condition,
    pub trial: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub previous_session: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_trial: Option<String>,
    pub feedback_enabled: bool,
    pub scenario: ScenarioView,
    pub prep: Option<PreparationSheet>,
    pub transcript: Transcript,
    pub phase: Phase,
    pub reflection_questions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflection: Option<Vec<String>>,
    pub abandoned: bool,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            id: s.id.clone(),
            condition: s.condition,
            trial: s.trial,
            previous_session: s.previous_session.clone(),
            second_trial: s.second_trial.clone(),
            feedback_enabled: s.feedback_enabled,
            scenario: (&s.scenario).into(),
            prep: s.prep,
            transcript: s.transcript.clone(),
            phase: s.phase,
            reflection_questions: s.reflection_questions.clone(),
            reflection: s.reflection.clone(),
            abandoned: s.abandoned,
            created_at: s.created_at,
            updated_at: s.updated_at,
        }
    }
}
