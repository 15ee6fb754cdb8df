//! The simulated counterpart.
//!
//! The agent is prompted with a *subjective limit* that starts inside its
//! strategic target band and concedes toward the true reservation price as
//! the learner makes offers. Pricing decisions come from a deterministic
//! policy; the gateway only supplies wording, and any price it voices is
//! checked against the policy bounds before it reaches the learner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::div_round;
use crate::domain::{Money, PriceSignal, Role, Scenario, Speaker, Transcript};
use crate::extraction::{extract_rule_based, ExtractionConfig};
use crate::gateway::{CallSite, ChatRequest, GatewayError, ModelGateway};
use crate::prompts;

pub const DEFAULT_CONVERGENCE_TURN: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("degenerate limit range: reservation {reservation} leaves no room against market bound {bound}")]
    DegenerateRange { reservation: Money, bound: Money },
}

/// True when `a` is at least as good as `b` for an agent playing `role`.
fn at_least(role: Role, a: Money, b: Money) -> bool {
    match role {
        Role::Seller => a >= b,
        Role::Buyer => a <= b,
    }
}

fn strictly_better(role: Role, a: Money, b: Money) -> bool {
    a != b && at_least(role, a, b)
}

/// The agent's strategic target band: the third of the span between its
/// reservation and the favourable market bound.
pub fn limit_range(scenario: &Scenario) -> Result<(Money, Money), AgentError> {
    let res = scenario.counterpart_reservation;
    match scenario.agent_role() {
        Role::Seller => {
            let hi = scenario.market_max;
            if res >= hi {
                return Err(AgentError::DegenerateRange { reservation: res, bound: hi });
            }
            Ok((Money(hi.get() - div_round(hi.get() - res.get(), 3)), hi))
        }
        Role::Buyer => {
            let lo = scenario.market_min;
            if res <= lo {
                return Err(AgentError::DegenerateRange { reservation: res, bound: lo });
            }
            Ok((lo, Money(lo.get() + div_round(res.get() - lo.get(), 3))))
        }
    }
}

/// Uniform draw from [`limit_range`], reproducible from `seed`.
pub fn initial_subjective_limit(scenario: &Scenario, seed: u64) -> Result<Money, AgentError> {
    let (lo, hi) = limit_range(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Money(rng.random_range(lo.get()..=hi.get())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub role: Role,
    pub subjective_limit: Money,
    pub true_reservation: Money,
    pub turns_elapsed: u32,
    pub convergence_turn: u32,
    pub last_agent_offer: Option<Money>,
    pub rng_seed: u64,
    /// Every limit the agent has been prompted with, oldest first.
    pub limit_history: Vec<Money>,
    pub asked_for_offer: bool,
}

impl AgentState {
    pub fn new(scenario: &Scenario, seed: u64, convergence_turn: u32) -> Result<Self, AgentError> {
        let limit = initial_subjective_limit(scenario, seed)?;
        Ok(AgentState {
            role: scenario.agent_role(),
            subjective_limit: limit,
            true_reservation: scenario.counterpart_reservation,
            turns_elapsed: 0,
            convergence_turn: convergence_turn.max(1),
            last_agent_offer: None,
            rng_seed: seed,
            limit_history: vec![limit],
            asked_for_offer: false,
        })
    }
}

/// The limit after the counterpart offers `counterpart_offer`: the least
/// concession that still makes a strong counteroffer against the previous
/// limit, never past the reservation and never backwards. Once
/// `convergence_turn` agent turns have elapsed the limit is the reservation.
pub fn update_subjective_limit(state: &AgentState, counterpart_offer: Money) -> Money {
    let (prev, res) = (state.subjective_limit.get(), state.true_reservation.get());
    if state.turns_elapsed >= state.convergence_turn {
        return state.true_reservation;
    }
    let x = counterpart_offer.get();
    Money(match state.role {
        Role::Seller => {
            let rhs = prev + x.max(res);
            (rhs.div_euclid(2) + 1).max(res).min(prev)
        }
        Role::Buyer => {
            let rhs = prev + x.min(res);
            (rhs - 1).div_euclid(2).min(res).max(prev)
        }
    })
}

/// What the policy decided to do with the learner's latest message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum AgentMove {
    Guardrail,
    AskForOffer,
    Open { amount: Money },
    Counter { amount: Money },
    Hold,
    Accept { price: Money },
    /// The learner accepted the agent's standing offer.
    Confirm { price: Money },
}

impl AgentMove {
    pub fn deal(self) -> Option<Money> {
        match self {
            AgentMove::Accept { price } | AgentMove::Confirm { price } => Some(price),
            _ => None,
        }
    }

    fn signal(self) -> PriceSignal {
        match self {
            AgentMove::Open { amount } | AgentMove::Counter { amount } => PriceSignal::Offer { amount },
            AgentMove::Accept { .. } => PriceSignal::Accepted,
            _ => PriceSignal::NoOffer,
        }
    }
}

fn latest_learner_offer(history: &Transcript, learner_role: Role) -> Option<Money> {
    history
        .turns_by(Speaker::Learner)
        .filter_map(|t| t.price_signal.representative(learner_role))
        .last()
}

/// Outcome of [`decide`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub agent_move: AgentMove,
    /// The limit the move was priced against.
    pub limit: Money,
    /// State after the turn, with `turns_elapsed` already advanced.
    pub next: AgentState,
}

/// Pure pricing policy.
pub fn decide(state: &AgentState, scenario: &Scenario, learner_signal: PriceSignal) -> Decision {
    let role = state.role;
    let mut next = state.clone();
    let learner_price = learner_signal.representative(scenario.learner_role);

    let mv = match (learner_signal, learner_price) {
        (_, Some(x)) if scenario.is_unrealistic(x) => {
            return Decision { agent_move: AgentMove::Guardrail, limit: state.subjective_limit, next }
        }
        (_, Some(x)) => {
            if state.last_agent_offer.is_some() {
                next.subjective_limit = update_subjective_limit(state, x);
            }
            let limit = next.subjective_limit;
            if at_least(role, x, limit) {
                AgentMove::Accept { price: x }
            } else {
                match state.last_agent_offer {
                    None => AgentMove::Open { amount: limit },
                    Some(last) if strictly_better(role, last, limit) => AgentMove::Counter { amount: limit },
                    Some(_) => AgentMove::Hold,
                }
            }
        }
        (PriceSignal::Accepted, None) if state.last_agent_offer.is_some() => AgentMove::Confirm {
            price: state.last_agent_offer.expect("checked"),
        },
        _ => match state.last_agent_offer {
            Some(_) => AgentMove::Hold,
            None if !state.asked_for_offer => {
                next.asked_for_offer = true;
                AgentMove::AskForOffer
            }
            None => AgentMove::Open { amount: next.subjective_limit },
        },
    };
    if let AgentMove::Open { amount } | AgentMove::Counter { amount } = mv {
        next.last_agent_offer = Some(amount);
    }
    let limit = next.subjective_limit;
    next.turns_elapsed += 1;
    if next.turns_elapsed >= next.convergence_turn {
        next.subjective_limit = next.true_reservation;
    }
    next.limit_history.push(next.subjective_limit);
    Decision { agent_move: mv, limit, next }
}

/// Deterministic wording for a move, used offline and as the fallback when
/// gateway prose breaks the pricing rules.
pub fn template_text(mv: AgentMove, role: Role, variant: u32) -> String {
    let pick = |options: &[&str]| options[variant as usize % options.len()].to_owned();
    match (mv, role) {
        (AgentMove::Guardrail, _) => prompts::GUARDRAIL_REPLY.into(),
        (AgentMove::AskForOffer, Role::Seller) => "Happy to talk about it. It's in great shape and \
has been well looked after. What price did you have in mind?"
            .into(),
        (AgentMove::AskForOffer, Role::Buyer) => "I'm definitely interested. What price are you \
hoping to get?"
            .into(),
        (AgentMove::Open { amount }, Role::Seller) => format!(
            "Thanks for your interest. Considering its condition and everything that comes with \
it, I'm asking {amount}."
        ),
        (AgentMove::Open { amount }, Role::Buyer) => format!(
            "Thanks for the details. Based on what similar offers go for, I could pay {amount}."
        ),
        (AgentMove::Counter { amount }, Role::Seller) => pick(&[
            "I appreciate the offer, but I can't go that low. I could come down to {}.",
            "That's still below what it's worth. The best I can do right now is {}.",
            "I understand where you're coming from. I can lower the price to {}.",
        ])
        .replace("{}", &amount.to_string()),
        (AgentMove::Counter { amount }, Role::Buyer) => pick(&[
            "That's more than I can pay. I could go up to {}.",
            "I see the value, but that's a stretch for me. I can offer {}.",
        ])
        .replace("{}", &amount.to_string()),
        (AgentMove::Hold, _) => pick(&[
            "I hear you, but I've already made you a fair offer and I'm not able to move further right now.",
            "I'm going to stand by my last offer. It's a fair price for what you're getting.",
        ]),
        (AgentMove::Accept { price }, _) => format!("You have a deal at {price}. Thank you!"),
        (AgentMove::Confirm { price }, _) => format!("Great, then we're agreed at {price}. Pleasure doing business with you."),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentVoice {
    /// Template wording only; no gateway calls.
    #[default]
    Template,
    /// Gateway prose, validated against the policy.
    Gateway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub convergence_turn: u32,
    pub voice: AgentVoice,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { convergence_turn: DEFAULT_CONVERGENCE_TURN, voice: AgentVoice::Template }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentReply {
    pub text: String,
    pub signal: PriceSignal,
    pub agent_move: AgentMove,
    pub deal: Option<Money>,
    /// Gateway prose was rejected and template text used instead.
    pub fell_back: bool,
}

/// The instructional prompt with the current limit substituted.
pub fn agent_request(state: &AgentState, scenario: &Scenario, history: &Transcript) -> ChatRequest {
    let system = prompts::render_agent_template(
        &scenario.agent_prompt_template,
        state.subjective_limit,
        scenario.unrealistic_floor,
    );
    history.turns.iter().fold(ChatRequest::new(CallSite::Agent, system), |req, t| match t.speaker {
        Speaker::Learner => req.user(&t.text),
        Speaker::Agent => req.assistant(&t.text),
    })
}

/// Whether a signal voiced by the agent respects its limit, its previous
/// offer and the learner's current offer.
fn voiced_signal_ok(
    signal: PriceSignal,
    state: &AgentState,
    limit: Money,
    learner_offer: Option<Money>,
) -> bool {
    let role = state.role;
    match signal {
        PriceSignal::Offer { .. } | PriceSignal::Range { .. } => {
            let a = signal.representative(role).expect("priced");
            at_least(role, a, limit)
                && state.last_agent_offer.is_none_or(|last| strictly_better(role, last, a))
                && learner_offer.is_none_or(|x| at_least(role, a, x))
        }
        PriceSignal::Accepted => learner_offer.is_some_and(|x| at_least(role, x, limit)),
        _ => true,
    }
}

/// Produces the agent's next turn. The last turn of `history` must be the
/// learner's.
pub fn next_agent_message(
    state: &AgentState,
    scenario: &Scenario,
    history: &Transcript,
    gateway: &dyn ModelGateway,
    cfg: &AgentConfig,
) -> Result<(AgentReply, AgentState), GatewayError> {
    let learner_signal = history
        .turns
        .last()
        .filter(|t| t.speaker == Speaker::Learner)
        .map(|t| t.price_signal)
        .unwrap_or(PriceSignal::NoOffer);
    let Decision { agent_move: mv, limit, mut next } = decide(state, scenario, learner_signal);
    let template = |mv: AgentMove| AgentReply {
        text: match mv {
            AgentMove::Guardrail => scenario
                .guardrail_reply
                .clone()
                .unwrap_or_else(|| prompts::GUARDRAIL_REPLY.to_owned()),
            _ => template_text(mv, state.role, state.turns_elapsed),
        },
        signal: mv.signal(),
        agent_move: mv,
        deal: mv.deal(),
        fell_back: false,
    };

    let needs_prose = cfg.voice == AgentVoice::Gateway
        && !matches!(mv, AgentMove::Guardrail | AgentMove::Confirm { .. });
    if !needs_prose {
        return Ok((template(mv), next));
    }

    // The prompt carries the limit the policy is working with this turn.
    let mut prompted = state.clone();
    prompted.subjective_limit = limit;
    let learner_offer = latest_learner_offer(history, scenario.learner_role);
    let request = agent_request(&prompted, scenario, history);
    let extraction = ExtractionConfig { use_gateway_fallback: false, ..Default::default() };

    let mut attempt = request.clone();
    for round in 0..2 {
        let reply = gateway.complete(&attempt)?;
        let text = reply.trim();
        if !text.is_empty() {
            let signal = extract_rule_based(text, &history.turns, &extraction).unwrap_or(PriceSignal::NoOffer);
            if voiced_signal_ok(signal, state, limit, learner_offer) {
                let deal = match signal {
                    PriceSignal::Accepted => learner_offer,
                    _ => None,
                };
                if let Some(a) = signal.representative(state.role) {
                    next.last_agent_offer = Some(a);
                }
                return Ok((
                    AgentReply { text: text.to_owned(), signal, agent_move: mv, deal, fell_back: false },
                    next,
                ));
            }
        }
        if round == 0 {
            attempt = request.clone().assistant(text).user(format!(
                "Your last reply broke your instructions. Reply again in character. Do not go below {} and do not repeat or raise a previous price.",
                limit
            ));
        }
    }
    let mut reply = template(mv);
    reply.fell_back = true;
    Ok((reply, next))
}
