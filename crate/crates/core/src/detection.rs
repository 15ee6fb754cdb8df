//! The eight tactical categories.
//!
//! Price-based categories are integer inequalities evaluated in
//! cross-multiplied form, so verdicts never depend on floating point.
//! Behavioural categories are answered by classifier prompts through the
//! gateway. [`annotate_transcript`] applies each category inside its
//! applicability window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    offer_ledger, AnnotationLabel, ErrorCategory, LedgerEntry, Money, PreparationSheet, Role,
    Scenario, Speaker, Transcript, Turn,
};
use crate::gateway::{CallSite, ChatRequest, GatewayError, ModelGateway};
use crate::prompts;

pub const COUNTEROFFER_WINDOW: usize = 3;
pub const RATIONALE_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectionError {
    #[error("degenerate target range: walk-away {walk_away} leaves no room against the market bound {bound}")]
    DegenerateRange { walk_away: Money, bound: Money },
    #[error("missing reference offer: {0}")]
    MissingReference(&'static str),
}

/// `n / d` rounded to nearest, ties up, for `n >= 0` and `d > 0`.
pub(crate) fn div_round(n: i64, d: i64) -> i64 {
    (2 * n + d).div_euclid(2 * d)
}

pub fn check_walk_away(prep: &PreparationSheet, scenario: &Scenario) -> bool {
    let w = prep.walk_away;
    match (scenario.budget, scenario.learner_role) {
        (Some(b), _) => w == b,
        (None, Role::Buyer) => w < scenario.market_max,
        (None, Role::Seller) => w > scenario.market_min,
    }
}

/// The band a realistic but ambitious target should fall in: the third of
/// the span between the favourable market bound and the walk-away point
/// closest to that bound.
pub fn strategic_target_range(
    scenario: &Scenario,
    walk_away: Money,
) -> Result<(Money, Money), DetectionError> {
    match scenario.learner_role {
        Role::Buyer => {
            let lo = scenario.market_min;
            if walk_away <= lo {
                return Err(DetectionError::DegenerateRange { walk_away, bound: lo });
            }
            Ok((lo, Money(lo.get() + div_round(walk_away.get() - lo.get(), 3))))
        }
        Role::Seller => {
            let hi = scenario.market_max;
            if walk_away >= hi {
                return Err(DetectionError::DegenerateRange { walk_away, bound: hi });
            }
            Ok((Money(hi.get() - div_round(hi.get() - walk_away.get(), 3)), hi))
        }
    }
}

/// Membership in the first third is decided exactly, without the rounding
/// [`strategic_target_range`] applies for display, so the verdict is
/// invariant under rescaling all amounts.
pub fn check_target(prep: &PreparationSheet, scenario: &Scenario) -> Result<bool, DetectionError> {
    strategic_target_range(scenario, prep.walk_away)?;
    let (t, w) = (prep.target.get() as i128, prep.walk_away.get() as i128);
    Ok(match scenario.learner_role {
        Role::Buyer => {
            let lo = scenario.market_min.get() as i128;
            t >= lo && 3 * (t - lo) <= w - lo
        }
        Role::Seller => {
            let hi = scenario.market_max.get() as i128;
            t <= hi && 3 * (hi - t) <= hi - w
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstMover {
    Learner,
    Agent,
    Nobody,
}

/// Who stated the first concrete price, and where.
pub fn detect_first_offer(transcript: &Transcript) -> (FirstMover, Option<usize>) {
    match transcript.turns.iter().find(|t| t.price_signal.is_priced()) {
        Some(t) if t.speaker == Speaker::Learner => (FirstMover::Learner, Some(t.index)),
        Some(t) => (FirstMover::Agent, Some(t.index)),
        None => (FirstMover::Nobody, None),
    }
}

/// Buyer: `o1 <= 0.9 T` with nothing on the table, else the midpoint of the
/// counterpart's offer and `o1` must not exceed `T`. Sellers mirror both.
pub fn check_ambitious_opening(
    o1: Money,
    prior_agent_offer: Option<Money>,
    target: Money,
    role: Role,
) -> bool {
    let (o, t) = (o1.get() as i128, target.get() as i128);
    match (prior_agent_offer, role) {
        (None, Role::Buyer) => 10 * o <= 9 * t,
        (None, Role::Seller) => 10 * o >= 11 * t,
        (Some(s), Role::Buyer) => s.get() as i128 + o <= 2 * t,
        (Some(s), Role::Seller) => s.get() as i128 + o >= 2 * t,
    }
}

/// A counteroffer is strong when it stays strictly on the learner's side of
/// the midpoint between their previous offer and the nearer of the
/// counterpart's offer and their own walk-away.
pub fn check_strong_counteroffer(
    o_t: Money,
    o_prev: Money,
    s_current: Money,
    walk_away: Money,
    role: Role,
) -> bool {
    let twice = 2 * o_t.get() as i128;
    match role {
        Role::Buyer => twice < o_prev.get() as i128 + s_current.min(walk_away).get() as i128,
        Role::Seller => twice > o_prev.get() as i128 + s_current.max(walk_away).get() as i128,
    }
}

/// [`check_strong_counteroffer`] for call sites where either reference may be
/// missing.
pub fn try_check_strong_counteroffer(
    o_t: Money,
    o_prev: Option<Money>,
    s_current: Option<Money>,
    walk_away: Money,
    role: Role,
) -> Result<bool, DetectionError> {
    let o_prev = o_prev.ok_or(DetectionError::MissingReference("no previous learner offer"))?;
    let s = s_current.ok_or(DetectionError::MissingReference("no counterpart offer yet"))?;
    Ok(check_strong_counteroffer(o_t, o_prev, s, walk_away, role))
}

/// The most lenient opening that still counts as ambitious.
pub fn opening_threshold(prior_agent_offer: Option<Money>, target: Money, role: Role) -> Money {
    let t = target.get();
    Money(match (prior_agent_offer, role) {
        (None, Role::Buyer) => (9 * t).div_euclid(10),
        (None, Role::Seller) => (11 * t + 9).div_euclid(10),
        (Some(s), _) => 2 * t - s.get(),
    })
}

/// Midpoint a strong counteroffer must stay beyond, rounded for display.
pub fn counteroffer_threshold(o_prev: Money, s_current: Money, walk_away: Money, role: Role) -> Money {
    let bound = match role {
        Role::Buyer => s_current.min(walk_away),
        Role::Seller => s_current.max(walk_away),
    };
    Money(div_round(o_prev.get() + bound.get(), 2))
}

fn ask_bool(
    gateway: &dyn ModelGateway,
    prompt: String,
    role: Role,
) -> Result<bool, GatewayError> {
    let request = ChatRequest::new(CallSite::Classifier, "").user(prompts::for_role(prompt, role));
    let reply = gateway.complete(&request)?;
    prompts::parse_bool_reply(&reply)
        .ok_or_else(|| GatewayError::BadResponse(format!("expected True/False, got {reply:?}")))
}

pub fn classify_icebreaker(
    first_learner_turn: &str,
    role: Role,
    gateway: &dyn ModelGateway,
) -> Result<bool, GatewayError> {
    if first_learner_turn.trim().is_empty() {
        return Ok(false);
    }
    ask_bool(gateway, prompts::icebreaker_prompt(first_learner_turn.trim()), role)
}

/// `passage` is the learner's priced turn with up to two preceding turns,
/// already rendered as speaker-prefixed lines.
pub fn classify_rationale(
    passage: &str,
    role: Role,
    gateway: &dyn ModelGateway,
) -> Result<bool, GatewayError> {
    ask_bool(gateway, prompts::rationale_prompt(&format!("\"{passage}\"")), role)
}

pub fn classify_closing(
    final_learner_turns: &[&str],
    role: Role,
    gateway: &dyn ModelGateway,
) -> Result<bool, GatewayError> {
    let joined = final_learner_turns
        .iter()
        .map(|t| format!("\"{}\"", t.trim()))
        .collect::<Vec<_>>()
        .join("\n");
    ask_bool(gateway, prompts::closing_prompt(&joined), role)
}

/// Speaker-prefixed lines ("Buyer: ...", "Seller: ...").
pub fn render_turns(turns: &[Turn], learner_role: Role) -> String {
    turns
        .iter()
        .map(|t| {
            let role = match t.speaker {
                Speaker::Learner => learner_role,
                Speaker::Agent => learner_role.opposite(),
            };
            let noun = match role {
                Role::Buyer => "Buyer",
                Role::Seller => "Seller",
            };
            format!("{noun}: {}", t.text.trim())
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Reference values the formula detectors read off a transcript.
#[derive(Debug, Clone)]
pub struct DetectionContext<'a> {
    pub scenario: &'a Scenario,
    pub prep: Option<&'a PreparationSheet>,
    pub ledger_learner: Vec<LedgerEntry>,
    pub ledger_agent: Vec<LedgerEntry>,
    pub counteroffer_checks_done: usize,
    pub rationale_checks_done: usize,
}

impl<'a> DetectionContext<'a> {
    pub fn new(
        transcript: &Transcript,
        scenario: &'a Scenario,
        prep: Option<&'a PreparationSheet>,
    ) -> Self {
        let role = scenario.learner_role;
        DetectionContext {
            scenario,
            prep,
            ledger_learner: offer_ledger(transcript, Speaker::Learner, role),
            ledger_agent: offer_ledger(transcript, Speaker::Agent, role.opposite()),
            counteroffer_checks_done: 0,
            rationale_checks_done: 0,
        }
    }

    pub fn role(&self) -> Role {
        self.scenario.learner_role
    }

    /// The counterpart's most recent offer strictly before `turn_index`.
    pub fn agent_offer_before(&self, turn_index: usize) -> Option<Money> {
        self.ledger_agent
            .iter()
            .rev()
            .find(|e| e.turn_index < turn_index)
            .map(|e| e.amount)
    }

    pub fn learner_offer_before(&self, turn_index: usize) -> Option<Money> {
        self.ledger_learner
            .iter()
            .rev()
            .find(|e| e.turn_index < turn_index)
            .map(|e| e.amount)
    }

    pub fn learner_offer_at(&self, turn_index: usize) -> Option<Money> {
        self.ledger_learner
            .iter()
            .find(|e| e.turn_index == turn_index)
            .map(|e| e.amount)
    }
}

/// Labels for one transcript plus notes on anything that could not be
/// judged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub labels: Vec<AnnotationLabel>,
    pub diagnostics: Vec<String>,
}

impl Annotation {
    /// The sparse form written to annotated corpora.
    pub fn applicable_labels(&self) -> Vec<AnnotationLabel> {
        self.labels.iter().copied().filter(|l| l.applicable).collect()
    }

    pub fn mistakes(&self) -> impl Iterator<Item = &AnnotationLabel> {
        self.labels.iter().filter(|l| l.is_mistake())
    }
}

struct Labeler<'g> {
    gateway: &'g dyn ModelGateway,
    out: Annotation,
}

impl Labeler<'_> {
    fn push(&mut self, label: AnnotationLabel) {
        self.out.labels.push(label);
    }

    fn classified(
        &mut self,
        category: ErrorCategory,
        turn_index: Option<usize>,
        result: Result<bool, GatewayError>,
    ) {
        match result {
            Ok(v) => self.push(AnnotationLabel::applicable(category, turn_index, v)),
            Err(e) => {
                self.out.diagnostics.push(match turn_index {
                    Some(i) => format!("{} at turn {i}: {e}", category.slug()),
                    None => format!("{}: {e}", category.slug()),
                });
                self.push(AnnotationLabel::not_applicable(category, turn_index));
            }
        }
    }
}

/// Applies all eight categories inside their windows. Gateway failures make
/// the affected label non-applicable and add a diagnostic instead of
/// failing the pass.
pub fn annotate_transcript(
    transcript: &Transcript,
    prep: Option<&PreparationSheet>,
    scenario: &Scenario,
    gateway: &dyn ModelGateway,
) -> Annotation {
    let role = scenario.learner_role;
    let mut ctx = DetectionContext::new(transcript, scenario, prep);
    let mut lab = Labeler { gateway, out: Annotation::default() };

    match prep {
        Some(p) => {
            lab.push(AnnotationLabel::applicable(
                ErrorCategory::StrategicWalkAway,
                None,
                check_walk_away(p, scenario),
            ));
            match check_target(p, scenario) {
                Ok(v) => lab.push(AnnotationLabel::applicable(ErrorCategory::StrategicTarget, None, v)),
                Err(e) => {
                    lab.out.diagnostics.push(format!("{}: {e}", ErrorCategory::StrategicTarget.slug()));
                    lab.push(AnnotationLabel::not_applicable(ErrorCategory::StrategicTarget, None));
                }
            }
        }
        None => {
            lab.push(AnnotationLabel::not_applicable(ErrorCategory::StrategicWalkAway, None));
            lab.push(AnnotationLabel::not_applicable(ErrorCategory::StrategicTarget, None));
        }
    }

    let learner_turns: Vec<&Turn> = transcript.turns_by(Speaker::Learner).collect();
    match learner_turns.first() {
        Some(first) => {
            let verdict = classify_icebreaker(&first.text, role, lab.gateway);
            lab.classified(ErrorCategory::BreakingIce, Some(first.index), verdict);
        }
        None => lab.push(AnnotationLabel::not_applicable(ErrorCategory::BreakingIce, None)),
    }

    let (mover, first_index) = detect_first_offer(transcript);
    // When the counterpart spoke first, the label sits on the learner's last
    // turn before that offer: the moment the learner could have anchored.
    let anchor = match (mover, first_index) {
        (FirstMover::Agent, Some(i)) => learner_turns.iter().rev().find(|t| t.index < i).map(|t| t.index),
        _ => first_index,
    };
    lab.push(AnnotationLabel::applicable(
        ErrorCategory::GivingFirstOffer,
        anchor,
        mover == FirstMover::Learner,
    ));

    let ledger = ctx.ledger_learner.clone();
    if let Some(opening) = ledger.first() {
        let label = match prep {
            Some(p) => AnnotationLabel::applicable(
                ErrorCategory::AmbitiousOpening,
                Some(opening.turn_index),
                check_ambitious_opening(
                    opening.amount,
                    ctx.agent_offer_before(opening.turn_index),
                    p.target,
                    role,
                ),
            ),
            None => AnnotationLabel::not_applicable(ErrorCategory::AmbitiousOpening, Some(opening.turn_index)),
        };
        lab.push(label);
    }

    for pair in ledger.windows(2).take(COUNTEROFFER_WINDOW) {
        let (prev, cur) = (pair[0], pair[1]);
        ctx.counteroffer_checks_done += 1;
        let s = ctx.agent_offer_before(cur.turn_index);
        let label = match (prep, s) {
            (Some(p), Some(s)) => AnnotationLabel::applicable(
                ErrorCategory::StrongCounteroffer,
                Some(cur.turn_index),
                check_strong_counteroffer(cur.amount, prev.amount, s, p.walk_away, role),
            ),
            _ => AnnotationLabel::not_applicable(ErrorCategory::StrongCounteroffer, Some(cur.turn_index)),
        };
        lab.push(label);
    }

    for entry in ledger.iter().take(RATIONALE_WINDOW) {
        ctx.rationale_checks_done += 1;
        let start = entry.turn_index.saturating_sub(2);
        let passage = render_turns(&transcript.turns[start..=entry.turn_index], role);
        let verdict = classify_rationale(&passage, role, lab.gateway);
        lab.classified(ErrorCategory::IncludingRationale, Some(entry.turn_index), verdict);
    }

    if transcript.deal.is_some() {
        match learner_turns.len() {
            0 => lab.push(AnnotationLabel::not_applicable(ErrorCategory::StrategicClosing, None)),
            n => {
                let tail = &learner_turns[n.saturating_sub(2)..];
                let texts: Vec<&str> = tail.iter().map(|t| t.text.as_str()).collect();
                let verdict = classify_closing(&texts, role, lab.gateway);
                lab.classified(ErrorCategory::StrategicClosing, Some(tail[tail.len() - 1].index), verdict);
            }
        }
    }

    debug_assert!(ctx.counteroffer_checks_done <= COUNTEROFFER_WINDOW);
    debug_assert!(ctx.rationale_checks_done <= RATIONALE_WINDOW);
    // Preparation labels first, then transcript labels in turn order.
    lab.out
        .labels
        .sort_by_key(|l| (l.turn_index.map_or(0, |i| i + 1), l.category));
    lab.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PriceSignal;
    use crate::gateway::{FnGateway, StubGateway, UnavailableGateway};
    use chrono::DateTime;

    fn car() -> Scenario {
        crate::scenarios::used_car()
    }

    fn prep(w: i64, t: i64, o: i64) -> PreparationSheet {
        PreparationSheet { walk_away: Money(w), target: Money(t), planned_opening: Money(o) }
    }

    #[test]
    fn walk_away_rules() {
        let mut s = car();
        s.budget = Some(Money(13500));
        assert!(check_walk_away(&prep(13500, 1, 1), &s));
        assert!(!check_walk_away(&prep(14000, 1, 1), &s));
        s.budget = None;
        assert!(!check_walk_away(&prep(15000, 1, 1), &s));
        assert!(check_walk_away(&prep(14999, 1, 1), &s));
    }

    #[test]
    fn target_range_examples() {
        let mut s = car();
        s.market_min = Money(11000);
        assert_eq!(strategic_target_range(&s, Money(14000)).unwrap(), (Money(11000), Money(12000)));
        assert!(matches!(
            strategic_target_range(&s, Money(11000)),
            Err(DetectionError::DegenerateRange { .. })
        ));
        s.market_min = Money(10000);
        assert_eq!(strategic_target_range(&s, Money(10001)).unwrap(), (Money(10000), Money(10000)));
        assert_eq!(strategic_target_range(&s, Money(10002)).unwrap(), (Money(10000), Money(10001)));

        s.market_min = Money(11000);
        assert!(check_target(&prep(14000, 11800, 1), &s).unwrap());
        assert!(!check_target(&prep(14000, 10500, 1), &s).unwrap());
        assert!(!check_target(&prep(14000, 12500, 1), &s).unwrap());
        // The displayed bound rounds 1000.67 up; the verdict uses the exact third.
        assert_eq!(strategic_target_range(&s, Money(14002)).unwrap().1, Money(12001));
        assert!(check_target(&prep(14002, 12000, 1), &s).unwrap());
        assert!(!check_target(&prep(14002, 12001, 1), &s).unwrap());
    }

    #[test]
    fn seller_mirror_range() {
        let s = crate::scenarios::summer_sublease();
        let mut seller = s.clone();
        seller.learner_role = Role::Seller;
        seller.market_max = Money(9000);
        assert_eq!(
            strategic_target_range(&seller, Money(7500)).unwrap(),
            (Money(8500), Money(9000))
        );
        assert!(strategic_target_range(&seller, Money(9000)).is_err());
    }

    #[test]
    fn opening_examples() {
        let b = Role::Buyer;
        assert!(check_ambitious_opening(Money(10800), None, Money(12000), b));
        assert!(!check_ambitious_opening(Money(10801), None, Money(12000), b));
        assert!(check_ambitious_opening(Money(10000), Some(Money(14000)), Money(12000), b));
        assert!(!check_ambitious_opening(Money(11000), Some(Money(14000)), Money(12000), b));
        assert_eq!(opening_threshold(None, Money(12000), b), Money(10800));
        assert_eq!(opening_threshold(Some(Money(14000)), Money(12000), b), Money(10000));
    }

    #[test]
    fn counteroffer_examples() {
        let b = Role::Buyer;
        let c = |o, p, s, w| check_strong_counteroffer(Money(o), Money(p), Money(s), Money(w), b);
        assert!(c(12400, 12000, 14000, 13000));
        assert!(!c(12500, 12000, 14000, 13000));
        assert!(c(12300, 12000, 12800, 13000));
        assert_eq!(
            counteroffer_threshold(Money(12000), Money(14000), Money(13000), b),
            Money(12500)
        );
        assert_eq!(
            try_check_strong_counteroffer(Money(1), None, Some(Money(2)), Money(3), b),
            Err(DetectionError::MissingReference("no previous learner offer"))
        );
    }

    fn build(lines: &[(Speaker, &str, PriceSignal)], deal: Option<i64>) -> Transcript {
        let mut t = Transcript::new("used-car");
        for (i, (sp, text, sig)) in lines.iter().enumerate() {
            t.push(*sp, *text, *sig, DateTime::from_timestamp(i as i64, 0).unwrap());
        }
        t.deal = deal.map(Money);
        t
    }

    #[test]
    fn first_offer_detection() {
        use Speaker::*;
        let t = build(
            &[
                (Learner, "hi", PriceSignal::NoOffer),
                (Agent, "14k", PriceSignal::Offer { amount: Money(14000) }),
                (Learner, "12k", PriceSignal::Offer { amount: Money(12000) }),
            ],
            None,
        );
        assert_eq!(detect_first_offer(&t), (FirstMover::Agent, Some(1)));
        let quiet = build(&[(Learner, "hi", PriceSignal::NoOffer)], None);
        assert_eq!(detect_first_offer(&quiet), (FirstMover::Nobody, None));
    }

    #[test]
    fn hello_only_transcript() {
        let t = build(&[(Speaker::Learner, "Hello!", PriceSignal::NoOffer)], None);
        let stub = StubGateway::constant("True");
        let a = annotate_transcript(&t, Some(&prep(13500, 11500, 10000)), &car(), &stub);
        let applicable: Vec<_> = a.applicable_labels().iter().map(|l| l.category).collect();
        assert_eq!(
            applicable,
            [
                ErrorCategory::StrategicWalkAway,
                ErrorCategory::StrategicTarget,
                ErrorCategory::GivingFirstOffer,
                ErrorCategory::BreakingIce,
            ]
        );
        assert_eq!(stub.calls(), 1);
    }

    #[test]
    fn gateway_failure_marks_labels_not_applicable() {
        let t = build(
            &[(Speaker::Learner, "I'd pay $10,000", PriceSignal::Offer { amount: Money(10000) })],
            None,
        );
        let a = annotate_transcript(&t, None, &car(), &UnavailableGateway);
        assert!(a.labels.iter().filter(|l| l.category == ErrorCategory::BreakingIce).all(|l| !l.applicable));
        assert_eq!(a.diagnostics.len(), 2);
    }

    #[test]
    fn unparseable_classifier_reply_is_a_diagnostic() {
        let g = FnGateway(|_: &ChatRequest| Ok("maybe".to_string()));
        assert!(classify_icebreaker("hello there", Role::Buyer, &g).is_err());
        assert_eq!(classify_icebreaker("  ", Role::Buyer, &g), Ok(false));
    }

    #[test]
    fn seller_learner_prompts_are_role_swapped() {
        let stub = StubGateway::constant("False").recording();
        classify_icebreaker("Hello", Role::Seller, &stub).unwrap();
        let prompt = &stub.requests()[0].messages[0].content;
        assert!(prompt.contains("whether the seller began"));
    }
}
