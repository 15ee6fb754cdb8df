//! Preparation, turn-based and holistic feedback.
//!
//! Every gateway call has a hard-coded fallback, so an unreachable model
//! degrades individual items instead of blocking the learner.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{
    check_ambitious_opening, check_target, check_walk_away, counteroffer_threshold, opening_threshold,
    render_turns, strategic_target_range, DetectionContext,
};
use crate::domain::{
    AnnotationLabel, Condition, ErrorCategory, FeedbackBundle, Money, PreparationItem, PreparationSheet, Role,
    Scenario, Speaker, Transcript, Turn, TurnItem,
};
use crate::gateway::{CallSite, ChatRequest, GatewayError, ModelGateway};
use crate::prompts;

/// Text shown when the suggestion-style feedback cannot be generated.
pub const OTHER_FEEDBACK_UNAVAILABLE: &str =
    "Sorry, feedback could not be generated for this negotiation. Please continue to the next step.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeedbackError {
    #[error("no comments to revise against")]
    EmptyComments,
    #[error("no categories given for direct feedback")]
    NoErrors,
    #[error("transcript has no learner turns")]
    NoLearnerTurns,
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepFeedbackMode {
    /// Fixed messages stating the correct answer.
    #[default]
    Template,
    /// Gateway prose, falling back to the template on failure.
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub prep_mode: PrepFeedbackMode,
}

fn ask(gateway: &dyn ModelGateway, prompt: String, role: Role) -> Result<String, GatewayError> {
    let request = ChatRequest::new(CallSite::Feedback, "").user(prompts::for_role(prompt, role));
    non_empty(gateway.complete(&request)?)
}

fn non_empty(reply: String) -> Result<String, GatewayError> {
    let trimmed = reply.trim();
    if trimmed.is_empty() {
        Err(GatewayError::BadResponse("empty reply".into()))
    } else {
        Ok(trimmed.to_owned())
    }
}

fn walk_away_template(prep: &PreparationSheet, scenario: &Scenario) -> String {
    match (scenario.budget, scenario.learner_role) {
        (Some(b), _) => format!(
            "Your walk-away price was {}, but your budget is {b}. Your walk-away point should come from the facts of your situation: with a firm budget, that budget is exactly your walk-away price.",
            prep.walk_away
        ),
        (None, Role::Buyer) => format!(
            "Your walk-away price was {}. Without a firm budget, your walk-away point should sit below the top of the market range, {}, or you risk paying more than the item is worth.",
            prep.walk_away, scenario.market_max
        ),
        (None, Role::Seller) => format!(
            "Your walk-away price was {}. Without a firm minimum, your walk-away point should sit above the bottom of the market range, {}, or you risk selling for less than the item is worth.",
            prep.walk_away, scenario.market_min
        ),
    }
}

fn walk_away_correct(scenario: &Scenario) -> String {
    match (scenario.budget, scenario.learner_role) {
        (Some(b), _) => format!("with a budget of ${}, the walk-away price should be exactly ${}.", b.get(), b.get()),
        (None, Role::Buyer) => format!("the walk-away price should be below the maximum market price of ${}.", scenario.market_max.get()),
        (None, Role::Seller) => format!("the walk-away price should be above the minimum market price of ${}.", scenario.market_min.get()),
    }
}

fn target_template(prep: &PreparationSheet, scenario: &Scenario, (lo, hi): (Money, Money)) -> String {
    let t = prep.target;
    let too_ambitious = match scenario.learner_role {
        Role::Buyer => t < lo,
        Role::Seller => t > hi,
    };
    if too_ambitious {
        let edge = match scenario.learner_role {
            Role::Buyer => format!("below the market range, which starts at {}", scenario.market_min),
            Role::Seller => format!("above the market range, which tops out at {}", scenario.market_max),
        };
        format!(
            "Your target price of {t} is {edge}. This overly ambitious target may cause offense. By overreaching, you may miss out on a good deal. A realistic yet ambitious target lies between {lo} and {hi}."
        )
    } else {
        format!(
            "Your target price of {t} is not ambitious enough to test how far the other side can be pushed. Aim for a target between {lo} and {hi}, at the favourable end of the market range."
        )
    }
}

fn opening_template(prep: &PreparationSheet, threshold: Money) -> String {
    format!(
        "You planned to open at {}. With a target price of {}, a strong first offer would be at or beyond {threshold}. Speaking an ambitious opening offer first anchors the other person's judgment of the price range and keeps your target near the midpoint of the range under discussion.",
        prep.planned_opening, prep.target
    )
}

/// Items for every mistaken preparation answer. The planned opening is
/// judged by the opening formula with nothing yet on the table.
pub fn preparation_feedback(
    prep: &PreparationSheet,
    scenario: &Scenario,
    gateway: &dyn ModelGateway,
    mode: PrepFeedbackMode,
) -> (Vec<PreparationItem>, Vec<String>) {
    let role = scenario.learner_role;
    let mut items = Vec::new();
    let mut diagnostics = Vec::new();
    // Generated prose only ships buyer-worded prompts; sellers get templates.
    let generate = mode == PrepFeedbackMode::Generated && role == Role::Buyer;
    let mut emit = |category: ErrorCategory, prompt: String, template: String| {
        let message = if generate {
            match ask(gateway, prompt, role) {
                Ok(text) => text,
                Err(e) => {
                    diagnostics.push(format!("{}: {e}; using template", category.slug()));
                    template
                }
            }
        } else {
            template
        };
        items.push(PreparationItem { category, message });
    };

    if !check_walk_away(prep, scenario) {
        emit(
            ErrorCategory::StrategicWalkAway,
            prompts::walk_away_prompt(prep.walk_away, &walk_away_correct(scenario)),
            walk_away_template(prep, scenario),
        );
    }
    if let (Ok(false), Ok(range)) = (check_target(prep, scenario), strategic_target_range(scenario, prep.walk_away)) {
        let prompt = if prep.target < range.0 {
            prompts::low_target_prompt(prep.target, scenario.market_min)
        } else {
            prompts::high_target_prompt(prep.target, range.1, scenario.market_min)
        };
        emit(ErrorCategory::StrategicTarget, prompt, target_template(prep, scenario, range));
    }
    if !check_ambitious_opening(prep.planned_opening, None, prep.target, role) {
        let threshold = opening_threshold(None, prep.target, role);
        emit(
            ErrorCategory::AmbitiousOpening,
            prompts::planned_opening_prompt(prep.planned_opening, prep.target, threshold),
            opening_template(prep, threshold),
        );
    }
    (items, diagnostics)
}

/// Comments and their merged form for one erroneous turn.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirectFeedback {
    pub comments: Vec<String>,
    pub text: String,
    pub diagnostics: Vec<String>,
}

/// One prompt and one fallback per category, with the numeric slots filled.
fn category_prompt(
    category: ErrorCategory,
    turn: &Turn,
    transcript: &Transcript,
    ctx: &DetectionContext<'_>,
) -> (String, String) {
    let role = ctx.role();
    let start = turn.index.saturating_sub(3);
    let conversation = render_turns(&transcript.turns[start..=turn.index.min(transcript.turns.len() - 1)], role);
    let target = ctx.prep.map(|p| p.target).unwrap_or_default();
    match category {
        ErrorCategory::BreakingIce => (
            prompts::definition_feedback_prompt(
                &conversation,
                "The buyer started discussing the deal without breaking the ice first.",
                prompts::ICEBREAKER_EXEMPLAR,
            ),
            prompts::ICEBREAKER_EXEMPLAR.to_owned(),
        ),
        ErrorCategory::GivingFirstOffer => (
            prompts::definition_feedback_prompt(
                &conversation,
                "The buyer let the seller state the first price offer.",
                prompts::FIRST_OFFER_EXEMPLAR,
            ),
            prompts::FIRST_OFFER_EXEMPLAR.to_owned(),
        ),
        ErrorCategory::AmbitiousOpening => {
            let s = ctx.agent_offer_before(turn.index);
            let threshold = opening_threshold(s, target, role);
            (
                prompts::threshold_feedback_prompt(&conversation, "first offer", s, target, threshold),
                prompts::threshold_explanation("first offer", s, target, threshold, true),
            )
        }
        ErrorCategory::StrongCounteroffer => {
            let s = ctx.agent_offer_before(turn.index);
            let o_prev = ctx.learner_offer_before(turn.index);
            let w = ctx.prep.map(|p| p.walk_away);
            let threshold = match (o_prev, s, w) {
                (Some(o), Some(s), Some(w)) => counteroffer_threshold(o, s, w, role),
                _ => target,
            };
            (
                prompts::threshold_feedback_prompt(&conversation, "counteroffer", s, target, threshold),
                prompts::threshold_explanation("counteroffer", s, target, threshold, true),
            )
        }
        ErrorCategory::IncludingRationale => {
            let start = turn.index.saturating_sub(2);
            let passage = render_turns(&transcript.turns[start..=turn.index], role);
            (prompts::rationale_feedback_prompt(&passage), prompts::RATIONALE_EXEMPLAR.trim().to_owned())
        }
        ErrorCategory::StrategicClosing => (
            prompts::definition_feedback_prompt(
                &conversation,
                "The buyer did not close the deal in a way that heightens the seller's commitment.",
                prompts::CLOSING_EXEMPLAR,
            ),
            prompts::CLOSING_EXEMPLAR.to_owned(),
        ),
        ErrorCategory::StrategicWalkAway | ErrorCategory::StrategicTarget => {
            (String::new(), String::new())
        }
    }
}

/// One call per category, then a summarising call when there is more than
/// one comment.
pub fn direct_feedback(
    turn: &Turn,
    errors_on_turn: &[ErrorCategory],
    transcript: &Transcript,
    ctx: &DetectionContext<'_>,
    gateway: &dyn ModelGateway,
) -> Result<DirectFeedback, FeedbackError> {
    let categories: Vec<ErrorCategory> =
        errors_on_turn.iter().copied().filter(|c| !c.is_preparation()).collect();
    if categories.is_empty() {
        return Err(FeedbackError::NoErrors);
    }
    let role = ctx.role();
    let mut out = DirectFeedback::default();
    for &category in &categories {
        let (prompt, fallback) = category_prompt(category, turn, transcript, ctx);
        let comment = match ask(gateway, prompt, role) {
            Ok(text) => text,
            Err(e) => {
                out.diagnostics.push(format!("{} at turn {}: {e}; using canned comment", category.slug(), turn.index));
                prompts::for_role(fallback, role)
            }
        };
        out.comments.push(comment);
    }
    out.text = if out.comments.len() == 1 {
        out.comments[0].clone()
    } else {
        match ask(gateway, prompts::summary_prompt(&numbered_comments(&out.comments)), role) {
            Ok(text) => text,
            Err(e) => {
                out.diagnostics.push(format!("summary at turn {}: {e}; joining comments", turn.index));
                out.comments.join(" ")
            }
        }
    };
    Ok(out)
}

fn numbered_comments(comments: &[String]) -> String {
    comments
        .iter()
        .enumerate()
        .map(|(i, c)| format!("comment {}: \"{}\"", i + 1, c))
        .collect::<Vec<_>>()
        .join("\n")
}

fn strip_answer(reply: &str) -> String {
    let mut s = reply.trim();
    for prefix in ["- ANSWER:", "-ANSWER:", "ANSWER:", "Answer:"] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim();
        }
    }
    let unquoted = s
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .filter(|inner| !inner.contains('"'));
    unquoted.unwrap_or(s).trim().to_owned()
}

/// Rewrites the learner's message so it would satisfy every comment.
pub fn revise_utterance(
    turn: &Turn,
    comments: &[String],
    role: Role,
    gateway: &dyn ModelGateway,
) -> Result<String, FeedbackError> {
    if comments.iter().all(|c| c.trim().is_empty()) {
        return Err(FeedbackError::EmptyComments);
    }
    let prompt = prompts::revision_prompt(&format!("\"{}\"", turn.text.trim()), &numbered_comments(comments));
    let reply = ask(gateway, prompt, role)?;
    let revised = strip_answer(&reply);
    if revised.is_empty() {
        return Err(GatewayError::BadResponse("empty revision".into()).into());
    }
    Ok(revised)
}

fn normalize_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric() || *c == '\'' || *c == '’')
                .map(|c| if c == '’' { '\'' } else { c })
                .collect::<String>()
                .trim_matches('\'')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Whether `text` reproduces a learner phrase: any four consecutive words of
/// a learner turn, or a whole turn when it is shorter.
pub fn quotes_learner(text: &str, transcript: &Transcript) -> bool {
    let haystack = format!(" {} ", normalize_tokens(text).join(" "));
    transcript.turns_by(Speaker::Learner).any(|turn| {
        let tokens = normalize_tokens(&turn.text);
        if tokens.is_empty() {
            return false;
        }
        let width = tokens.len().min(4);
        tokens
            .windows(width)
            .any(|w| haystack.contains(&format!(" {} ", w.join(" "))))
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Holistic {
    pub text: String,
    pub quotes_learner: bool,
    pub regenerated: bool,
}

/// Style feedback over the whole conversation. A reply that quotes no
/// learner phrase is regenerated once with a reminder, then kept as-is.
pub fn holistic_feedback(
    transcript: &Transcript,
    role: Role,
    gateway: &dyn ModelGateway,
) -> Result<Holistic, FeedbackError> {
    if transcript.turns_by(Speaker::Learner).next().is_none() {
        return Err(FeedbackError::NoLearnerTurns);
    }
    let prompt = prompts::for_role(prompts::holistic_prompt(&render_turns(&transcript.turns, role)), role);
    let request = ChatRequest::new(CallSite::Feedback, "").user(prompt);
    let first = non_empty(gateway.complete(&request)?)?;
    if quotes_learner(&first, transcript) {
        return Ok(Holistic { text: first, quotes_learner: true, regenerated: false });
    }
    let retry = request
        .assistant(first.clone())
        .user(prompts::for_role(prompts::HOLISTIC_QUOTE_REMINDER.to_owned(), role));
    let second = match gateway.complete(&retry).and_then(non_empty) {
        Ok(text) => text,
        Err(_) => first,
    };
    let quoted = quotes_learner(&second, transcript);
    Ok(Holistic { text: second, quotes_learner: quoted, regenerated: true })
}

/// Three zero-shot improvement suggestions, independent of the category
/// scheme.
pub fn other_feedback(transcript: &Transcript, role: Role, gateway: &dyn ModelGateway) -> Result<String, FeedbackError> {
    if transcript.turns.is_empty() {
        return Err(FeedbackError::EmptyTranscript);
    }
    let prompt = prompts::other_feedback_prompt(&render_turns(&transcript.turns, role));
    match ask(gateway, prompt, role) {
        Ok(text) => Ok(text),
        Err(e) => {
            tracing::warn!("suggestion feedback unavailable: {e}");
            Ok(OTHER_FEEDBACK_UNAVAILABLE.to_owned())
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FeedbackRequest<'a> {
    pub transcript: &'a Transcript,
    pub labels: &'a [AnnotationLabel],
    pub prep: Option<&'a PreparationSheet>,
    pub scenario: &'a Scenario,
    pub condition: Condition,
}

/// Builds the bundle for the request's condition. Items appear in a fixed
/// order: preparation, then turns by index, then holistic text.
pub fn assemble_bundle(
    request: &FeedbackRequest<'_>,
    gateway: &dyn ModelGateway,
    cfg: &FeedbackConfig,
) -> FeedbackBundle {
    let transcript = request.transcript;
    let role = request.scenario.learner_role;
    let mut bundle = FeedbackBundle::default();
    match request.condition {
        Condition::NoFeedback => return bundle,
        Condition::OtherFeedback => {
            match other_feedback(transcript, role, gateway) {
                Ok(text) => bundle.holistic = Some(text),
                Err(e) => bundle.diagnostics.push(format!("suggestions: {e}")),
            }
            return bundle;
        }
        Condition::Ace => {}
    }

    if let Some(prep) = request.prep {
        let (items, diagnostics) = preparation_feedback(prep, request.scenario, gateway, cfg.prep_mode);
        bundle.preparation_items = items;
        bundle.diagnostics.extend(diagnostics);
    }

    let ctx = DetectionContext::new(transcript, request.scenario, request.prep);
    let mut by_turn: BTreeMap<usize, Vec<ErrorCategory>> = BTreeMap::new();
    for label in request.labels.iter().filter(|l| l.is_mistake() && !l.category.is_preparation()) {
        if let Some(i) = label.turn_index.filter(|i| *i < transcript.turns.len()) {
            by_turn.entry(i).or_default().push(label.category);
        }
    }
    for (index, mut categories) in by_turn {
        categories.sort();
        categories.dedup();
        let turn = &transcript.turns[index];
        let direct = match direct_feedback(turn, &categories, transcript, &ctx, gateway) {
            Ok(d) => d,
            Err(e) => {
                bundle.diagnostics.push(format!("turn {index}: {e}"));
                continue;
            }
        };
        bundle.diagnostics.extend(direct.diagnostics.iter().cloned());
        let revised_utterance = match revise_utterance(turn, &direct.comments, role, gateway) {
            Ok(text) => Some(text),
            Err(e) => {
                bundle.diagnostics.push(format!("revision at turn {index}: {e}"));
                None
            }
        };
        bundle.turn_items.push(TurnItem {
            turn_index: index,
            categories,
            direct_feedback: direct.text,
            revised_utterance,
        });
    }

    match holistic_feedback(transcript, role, gateway) {
        Ok(h) => {
            if !h.quotes_learner {
                bundle.diagnostics.push("holistic: reply quotes no learner phrase".into());
            }
            bundle.holistic = Some(h.text);
        }
        Err(e) => bundle.diagnostics.push(format!("holistic: {e}")),
    }
    bundle
}
