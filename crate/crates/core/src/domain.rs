//! Shared vocabulary for scenarios, preparation, transcripts, price signals,
//! annotations and feedback. Nothing in here performs I/O.

use std::fmt;
use std::ops::{Add, Sub};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid preparation sheet: {0}")]
    InvalidPreparation(String),
    #[error("invalid price signal: {0}")]
    InvalidSignal(String),
    #[error("invalid transcript: {0}")]
    InvalidTranscript(String),
}

/// Whole currency units. There are no fractional amounts anywhere in the
/// bargaining model.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const fn new(units: i64) -> Self {
        Money(units)
    }

    pub const fn get(self) -> i64 {
        self.0
    }

    /// Integer amount with thousands separators and no currency sign.
    pub fn grouped(self) -> String {
        let digits = self.0.unsigned_abs().to_string();
        let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 1);
        if self.0 < 0 {
            out.push('-');
        }
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i).is_multiple_of(3) {
                out.push(',');
            }
            out.push(ch);
        }
        out
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.grouped())
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Buyer,
    Seller,
}

impl Role {
    pub fn opposite(self) -> Role {
        match self {
            Role::Buyer => Role::Seller,
            Role::Seller => Role::Buyer,
        }
    }

    pub fn noun(self) -> &'static str {
        match self {
            Role::Buyer => "buyer",
            Role::Seller => "seller",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Learner,
    Agent,
}

/// Experiment condition a learner session runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "ACE")]
    Ace,
    OtherFeedback,
    NoFeedback,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Ace, Condition::OtherFeedback, Condition::NoFeedback];
}

/// A single-issue bargaining scenario as seen by the learner.
///
/// `unrealistic_floor` is the guardrail threshold for the simulated
/// counterpart. For a buyer learner it is a floor below the market range;
/// for a seller learner it acts as a ceiling above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub item_description: String,
    pub market_min: Money,
    pub market_max: Money,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Money>,
    pub counterpart_reservation: Money,
    pub learner_role: Role,
    pub unrealistic_floor: Money,
    pub agent_prompt_template: String,
    /// Reply sent verbatim when the learner's offer crosses the guardrail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guardrail_reply: Option<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: &str| Err(DomainError::InvalidScenario(format!("{}: {m}", self.id)));
        if self.market_min >= self.market_max {
            return bad("market_min must be below market_max");
        }
        if self.counterpart_reservation < self.market_min
            || self.counterpart_reservation > self.market_max
        {
            return bad("counterpart_reservation must lie within the market range");
        }
        match self.learner_role {
            Role::Buyer if self.unrealistic_floor >= self.market_min => {
                return bad("unrealistic_floor must be below market_min")
            }
            Role::Seller if self.unrealistic_floor <= self.market_max => {
                return bad("unrealistic threshold must be above market_max for a seller learner")
            }
            _ => {}
        }
        if let Some(budget) = self.budget {
            if budget.get() <= 0 {
                return bad("budget must be positive");
            }
        }
        Ok(())
    }

    pub fn agent_role(&self) -> Role {
        self.learner_role.opposite()
    }

    /// True when an offer by the learner is far enough outside the market
    /// range to trigger the counterpart's guardrail reply.
    pub fn is_unrealistic(&self, learner_offer: Money) -> bool {
        match self.learner_role {
            Role::Buyer => learner_offer < self.unrealistic_floor,
            Role::Seller => learner_offer > self.unrealistic_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparationSheet {
    pub walk_away: Money,
    pub target: Money,
    pub planned_opening: Money,
}

impl PreparationSheet {
    /// Only positivity is enforced; ordering mistakes are for the detectors
    /// to judge.
    pub fn validate(&self) -> Result<(), DomainError> {
        for (name, value) in [
            ("walk_away", self.walk_away),
            ("target", self.target),
            ("planned_opening", self.planned_opening),
        ] {
            if value.get() <= 0 {
                return Err(DomainError::InvalidPreparation(format!(
                    "{name} must be positive, got {}",
                    value.get()
                )));
            }
        }
        Ok(())
    }
}

/// Offer semantics extracted from one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceSignal {
    Offer { amount: Money },
    Range { lo: Money, hi: Money },
    Accepted,
    Refused,
    NoOffer,
    Rephrasing,
}

impl PriceSignal {
    pub fn offer(amount: i64) -> Result<Self, DomainError> {
        if amount <= 0 {
            return Err(DomainError::InvalidSignal(format!(
                "offer amount must be positive, got {amount}"
            )));
        }
        Ok(PriceSignal::Offer {
            amount: Money(amount),
        })
    }

    /// Builds a range, collapsing equal endpoints into a single offer and
    /// swapping reversed ones.
    pub fn range(a: i64, b: i64) -> Result<Self, DomainError> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if lo <= 0 {
            return Err(DomainError::InvalidSignal(format!(
                "range endpoints must be positive, got {lo}"
            )));
        }
        if lo == hi {
            return PriceSignal::offer(lo);
        }
        Ok(PriceSignal::Range {
            lo: Money(lo),
            hi: Money(hi),
        })
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        match *self {
            PriceSignal::Offer { amount } if amount.get() <= 0 => Err(DomainError::InvalidSignal(
                "offer amount must be positive".into(),
            )),
            PriceSignal::Range { lo, hi } if lo >= hi || lo.get() <= 0 => Err(
                DomainError::InvalidSignal(format!("bad range {}..{}", lo.get(), hi.get())),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_priced(&self) -> bool {
        matches!(self, PriceSignal::Offer { .. } | PriceSignal::Range { .. })
    }

    /// The single amount a priced signal stands for when made by `role`:
    /// a buyer quoting a range is read at its top, a seller at its bottom.
    pub fn representative(&self, role: Role) -> Option<Money> {
        match *self {
            PriceSignal::Offer { amount } => Some(amount),
            PriceSignal::Range { lo, hi } => Some(match role {
                Role::Buyer => hi,
                Role::Seller => lo,
            }),
            _ => None,
        }
    }

    /// Every amount the signal mentions.
    pub fn amounts(&self) -> Vec<Money> {
        match *self {
            PriceSignal::Offer { amount } => vec![amount],
            PriceSignal::Range { lo, hi } => vec![lo, hi],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
    pub price_signal: PriceSignal,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub scenario_id: String,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deal: Option<Money>,
    #[serde(default)]
    pub duration_seconds: f64,
}

impl Transcript {
    pub fn new(scenario_id: impl Into<String>) -> Self {
        Transcript {
            scenario_id: scenario_id.into(),
            turns: Vec::new(),
            deal: None,
            duration_seconds: 0.0,
        }
    }

    /// Appends a turn with the next contiguous index and returns that index.
    pub fn push(
        &mut self,
        speaker: Speaker,
        text: impl Into<String>,
        price_signal: PriceSignal,
        timestamp: DateTime<Utc>,
    ) -> usize {
        let index = self.turns.len();
        self.turns.push(Turn {
            index,
            speaker,
            text: text.into(),
            price_signal,
            timestamp,
        });
        index
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for (pos, turn) in self.turns.iter().enumerate() {
            if turn.index != pos {
                return Err(DomainError::InvalidTranscript(format!(
                    "turn at position {pos} has index {}",
                    turn.index
                )));
            }
            turn.price_signal.validate()?;
        }
        if self.duration_seconds.is_nan() || self.duration_seconds < 0.0 {
            return Err(DomainError::InvalidTranscript(
                "duration_seconds must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn turns_by(&self, speaker: Speaker) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(move |t| t.speaker == speaker)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub turn_index: usize,
    pub amount: Money,
}

/// Concrete offers made by `speaker` (playing `role`), in turn order. Ranges
/// contribute their representative endpoint; non-priced turns contribute
/// nothing.
pub fn offer_ledger(transcript: &Transcript, speaker: Speaker, role: Role) -> Vec<LedgerEntry> {
    transcript
        .turns_by(speaker)
        .filter_map(|t| {
            t.price_signal.representative(role).map(|amount| LedgerEntry {
                turn_index: t.index,
                amount,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    StrategicWalkAway,
    StrategicTarget,
    BreakingIce,
    GivingFirstOffer,
    AmbitiousOpening,
    StrongCounteroffer,
    IncludingRationale,
    StrategicClosing,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 8] = [
        ErrorCategory::StrategicWalkAway,
        ErrorCategory::StrategicTarget,
        ErrorCategory::BreakingIce,
        ErrorCategory::GivingFirstOffer,
        ErrorCategory::AmbitiousOpening,
        ErrorCategory::StrongCounteroffer,
        ErrorCategory::IncludingRationale,
        ErrorCategory::StrategicClosing,
    ];

    pub const NEGOTIATION: [ErrorCategory; 6] = [
        ErrorCategory::BreakingIce,
        ErrorCategory::GivingFirstOffer,
        ErrorCategory::AmbitiousOpening,
        ErrorCategory::StrongCounteroffer,
        ErrorCategory::IncludingRationale,
        ErrorCategory::StrategicClosing,
    ];

    pub fn is_preparation(self) -> bool {
        matches!(
            self,
            ErrorCategory::StrategicWalkAway | ErrorCategory::StrategicTarget
        )
    }

    pub fn title(self) -> &'static str {
        match self {
            ErrorCategory::StrategicWalkAway => "Strategic walk-away",
            ErrorCategory::StrategicTarget => "Strategic target price",
            ErrorCategory::BreakingIce => "Breaking the ice",
            ErrorCategory::GivingFirstOffer => "Giving the first offer",
            ErrorCategory::AmbitiousOpening => "Ambitious opening point",
            ErrorCategory::StrongCounteroffer => "Strong counteroffer",
            ErrorCategory::IncludingRationale => "Including rationale",
            ErrorCategory::StrategicClosing => "Strategic closing",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ErrorCategory::StrategicWalkAway => "strategic_walk_away",
            ErrorCategory::StrategicTarget => "strategic_target",
            ErrorCategory::BreakingIce => "breaking_ice",
            ErrorCategory::GivingFirstOffer => "giving_first_offer",
            ErrorCategory::AmbitiousOpening => "ambitious_opening",
            ErrorCategory::StrongCounteroffer => "strong_counteroffer",
            ErrorCategory::IncludingRationale => "including_rationale",
            ErrorCategory::StrategicClosing => "strategic_closing",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

/// One binary judgement. `verdict == false` means a mistake was made; the
/// verdict is only meaningful when `applicable` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationLabel {
    pub category: ErrorCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_index: Option<usize>,
    pub verdict: bool,
    pub applicable: bool,
}

impl AnnotationLabel {
    pub fn applicable(category: ErrorCategory, turn_index: Option<usize>, verdict: bool) -> Self {
        AnnotationLabel {
            category,
            turn_index,
            verdict,
            applicable: true,
        }
    }

    pub fn not_applicable(category: ErrorCategory, turn_index: Option<usize>) -> Self {
        AnnotationLabel {
            category,
            turn_index,
            verdict: true,
            applicable: false,
        }
    }

    pub fn is_mistake(&self) -> bool {
        self.applicable && !self.verdict
    }
}

/// Transcript plus its annotations, as stored in annotated corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTranscript {
    #[serde(flatten)]
    pub transcript: Transcript,
    #[serde(default)]
    pub annotations: Vec<AnnotationLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparationItem {
    pub category: ErrorCategory,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnItem {
    pub turn_index: usize,
    pub categories: Vec<ErrorCategory>,
    pub direct_feedback: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised_utterance: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub preparation_items: Vec<PreparationItem>,
    pub turn_items: Vec<TurnItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holistic: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl FeedbackBundle {
    pub fn is_empty(&self) -> bool {
        self.preparation_items.is_empty() && self.turn_items.is_empty() && self.holistic.is_none()
    }
}

/// Confusion-matrix cells for one category, with "mistake present"
/// (verdict false) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    /// Records one (predicted, gold) verdict pair.
    pub fn record(&mut self, predicted_verdict: bool, gold_verdict: bool) {
        match (!predicted_verdict, !gold_verdict) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Zero when precision and recall are both zero (or undefined).
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: ErrorCategory,
    pub applicable: u64,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl CategoryMetrics {
    pub fn from_counts(category: ErrorCategory, counts: ConfusionCounts) -> Self {
        CategoryMetrics {
            category,
            applicable: counts.total(),
            counts,
            accuracy: counts.accuracy(),
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub positive_class: String,
    pub categories: Vec<CategoryMetrics>,
}
