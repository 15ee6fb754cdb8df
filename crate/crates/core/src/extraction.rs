//! Turning an utterance into a [`PriceSignal`].
//!
//! A deterministic rule layer handles digit-bearing prices and unambiguous
//! accept/refuse phrasing. Anything needing semantic judgement (spelled-out
//! numbers, bare agreement whose referent is unclear, restating the other
//! side's number) is deferred to the model gateway.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::{Money, PriceSignal, Turn};
use crate::gateway::{CallSite, ChatRequest, GatewayError, ModelGateway};
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub use_gateway_fallback: bool,
    pub locale_thousands_separator: char,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            use_gateway_fallback: true,
            locale_thousands_separator: ',',
        }
    }
}

fn amount_pattern(sep: char) -> String {
    let sep = regex::escape(&sep.to_string());
    format!(
        r"(?i)(?P<dollar>\$\s*)?\b(?P<num>\d{{1,3}}(?:{sep}\d{{3}})+(?:\.\d+)?|\d+(?:\.\d+)?)(?:\s*(?P<suffix>k|thousand|grand)\b)?(?P<after>\s*(?:dollars|bucks|usd)\b)?"
    )
}

static AMOUNT_DEFAULT: LazyLock<Regex> = LazyLock::new(|| Regex::new(&amount_pattern(',')).unwrap());

static UNIT_AFTER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:miles?|mi\b|km|kilometers?|years?|yrs?|months?|weeks?|days?|hours?|minutes?|people|percent|%|times|owners?|doors?|mpg|cylinders?|bedrooms?|seats?)").unwrap()
});

static MILEAGE_CONTEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:miles?|mileage|odometer)\b").unwrap());

static RANGE_GAP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:to|and|or|through|-|–|—|or maybe|to maybe)\s*$").unwrap()
});

static STRONG_ACCEPT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?:^|[.!?,]\s*)deal\b|\b(?:it's|its|it is) a deal\b|\b(?:we|you)(?: have|'ve got|'ve| got) (?:a|yourself a) deal\b|\bi accept\b|\bsounds? (?:good|great|fair|like a good)\b|\bworks for me\b|\bthat works\b|\bi'?ll take it\b|\bi will take it\b|\blet'?s do it\b|\bagreed\b|\bi agree\b",
    )
    .unwrap()
});

static WEAK_ACCEPT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:yes|yeah|yep|sure|ok|okay|alright|all right|fine)\b").unwrap()
});

static REFUSAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:can't|can’t|cannot|can not|won't|will not|not able|unable|don't think i (?:am|'m|can)|too much|too high|too low|too expensive|no way|not possible|beyond my|out of my|i'?ll pass|no thanks|not interested|not going to happen)",
    )
    .unwrap()
});

static REPHRASE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:you said|you mentioned|did you say|you're saying|you are saying|you would be willing to|you'd be willing to|you offered)\b",
    )
    .unwrap()
});

static WORD_NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:a|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen|twenty|thirty|forty|fifty|sixty|seventy|eighty|ninety)[\s-]+(?:hundred|thousand|grand)\b",
    )
    .unwrap()
});

#[derive(Debug, Clone, Copy)]
struct RawAmount {
    start: usize,
    end: usize,
    value: f64,
    has_decimal: bool,
    dollar: bool,
    multiplier: Option<f64>,
    after_word: bool,
    unit_follows: bool,
}

impl RawAmount {
    fn marked(&self) -> bool {
        self.dollar || self.multiplier.is_some() || self.after_word
    }

    fn scaled(&self) -> f64 {
        self.value * self.multiplier.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PriceExpr {
    Single(i64),
    Range(i64, i64),
}

fn scan(text: &str, sep: char) -> Vec<RawAmount> {
    let custom;
    let re: &Regex = if sep == ',' {
        &AMOUNT_DEFAULT
    } else {
        custom = Regex::new(&amount_pattern(sep)).expect("amount pattern");
        &custom
    };
    re.captures_iter(text)
        .filter_map(|caps| {
            let whole = caps.get(0)?;
            let num = caps.name("num")?.as_str();
            let cleaned: String = num.chars().filter(|c| *c != sep).collect();
            let value: f64 = cleaned.parse().ok()?;
            let multiplier = caps.name("suffix").map(|_| 1000.0);
            Some(RawAmount {
                start: whole.start(),
                end: whole.end(),
                value,
                has_decimal: cleaned.contains('.'),
                dollar: caps.name("dollar").is_some(),
                multiplier,
                after_word: caps.name("after").is_some(),
                unit_follows: UNIT_AFTER.is_match(&text[whole.end()..]),
            })
        })
        .collect()
}

fn as_price(raw: &RawAmount, marked: bool, mileage_context: bool) -> Option<i64> {
    if raw.unit_follows {
        return None;
    }
    let value = raw.scaled();
    if !marked {
        if value < 100.0 || mileage_context {
            return None;
        }
        let year_like = !raw.has_decimal && (1900.0..=2099.0).contains(&value);
        if year_like {
            return None;
        }
    }
    let rounded = value.round() as i64;
    (rounded >= 1).then_some(rounded)
}

fn price_expressions(text: &str, sep: char) -> Vec<PriceExpr> {
    let raws = scan(text, sep);
    let mileage = MILEAGE_CONTEXT.is_match(text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < raws.len() {
        if i + 1 < raws.len() && RANGE_GAP.is_match(&text[raws[i].end..raws[i + 1].start]) {
            let mut first = raws[i];
            let second = raws[i + 1];
            // "10 to 11k": the suffix on the second amount scales the first.
            if first.multiplier.is_none() && second.multiplier.is_some() && first.value < 100.0 {
                first.multiplier = second.multiplier;
            }
            let marked = first.marked() || second.marked();
            if let (Some(a), Some(b)) = (
                as_price(&first, marked, mileage),
                as_price(&second, marked, mileage),
            ) {
                out.push(if a == b {
                    PriceExpr::Single(a)
                } else {
                    PriceExpr::Range(a.min(b), a.max(b))
                });
                i += 2;
                continue;
            }
        }
        if let Some(a) = as_price(&raws[i], raws[i].marked(), mileage) {
            out.push(PriceExpr::Single(a));
        }
        i += 1;
    }
    out
}

fn to_signal(expr: PriceExpr) -> PriceSignal {
    match expr {
        PriceExpr::Single(a) => PriceSignal::Offer { amount: Money(a) },
        PriceExpr::Range(lo, hi) => PriceSignal::Range {
            lo: Money(lo),
            hi: Money(hi),
        },
    }
}

/// A strong acceptance cue outside a question ("Do we have a deal?").
fn asserts_acceptance(text: &str) -> bool {
    STRONG_ACCEPT.find_iter(text).any(|m| {
        let rest = &text[m.end()..];
        rest.find(['.', '!', '?']).map(|i| &rest[i..i + 1]) != Some("?")
    })
}

/// Rule-layer extraction. `None` means the utterance needs semantic
/// judgement and should go to the gateway.
pub fn extract_rule_based(
    utterance: &str,
    conversation_so_far: &[Turn],
    cfg: &ExtractionConfig,
) -> Option<PriceSignal> {
    let text = utterance.trim();
    if text.is_empty() {
        return Some(PriceSignal::NoOffer);
    }
    if REPHRASE.is_match(text) {
        return None;
    }
    let prior = conversation_so_far
        .iter()
        .rev()
        .map(|t| t.price_signal)
        .find(PriceSignal::is_priced);
    let refusal = REFUSAL.is_match(text);
    let strong = asserts_acceptance(text) && !refusal;
    let weak = WEAK_ACCEPT.is_match(text) && !refusal;

    let exprs = price_expressions(text, cfg.locale_thousands_separator);
    if let Some(&last) = exprs.last() {
        if strong {
            match (prior, last) {
                (Some(p), PriceExpr::Single(a)) if p.amounts().contains(&Money(a)) => {
                    return Some(PriceSignal::Accepted)
                }
                (None, _) => return None,
                _ => {}
            }
        } else if weak {
            if let (Some(p), PriceExpr::Single(a)) = (prior, last) {
                if p.amounts().contains(&Money(a)) {
                    return Some(PriceSignal::Accepted);
                }
            }
        }
        return Some(to_signal(last));
    }

    if WORD_NUMBER.is_match(text) {
        return None;
    }
    if refusal {
        return Some(PriceSignal::Refused);
    }
    match (strong, weak, prior.is_some()) {
        (true, _, true) => Some(PriceSignal::Accepted),
        (false, true, true) => None,
        _ => Some(PriceSignal::NoOffer),
    }
}

static REPLY_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\d[\d,]*(?:\.\d+)?\s*k?").unwrap());

/// Reads the gateway's one-line extraction answer. Anything unrecognised
/// becomes `NoOffer`.
pub fn parse_extraction_reply(reply: &str) -> PriceSignal {
    let line = reply.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let mut body = line.trim();
    if let Some(rest) = body.strip_prefix("Offer:").or_else(|| body.strip_prefix("Offer :")) {
        body = rest.trim();
    }
    let lower = body.to_ascii_lowercase();
    if lower.contains("accepted") {
        return PriceSignal::Accepted;
    }
    if lower.contains("refused") {
        return PriceSignal::Refused;
    }
    if lower.contains("rephras") {
        return PriceSignal::Rephrasing;
    }
    if lower.contains("no offer") {
        return PriceSignal::NoOffer;
    }
    let amounts: Vec<i64> = REPLY_NUMBER
        .find_iter(body)
        .filter_map(|m| {
            let s = m.as_str().trim();
            let (digits, mult) = match s.strip_suffix(['k', 'K']) {
                Some(d) => (d.trim(), 1000.0),
                None => (s, 1.0),
            };
            let cleaned: String = digits.chars().filter(|c| *c != ',').collect();
            cleaned.parse::<f64>().ok().map(|v| (v * mult).round() as i64)
        })
        .filter(|v| *v > 0)
        .collect();
    match amounts.as_slice() {
        [a] => PriceSignal::Offer { amount: Money(*a) },
        [a, b] => PriceSignal::range(*a, *b).unwrap_or(PriceSignal::NoOffer),
        _ => PriceSignal::NoOffer,
    }
}

/// Full pipeline: rules first, then (optionally) the extraction prompt.
pub fn extract_price_signal(
    utterance: &str,
    conversation_so_far: &[Turn],
    gateway: &dyn ModelGateway,
    cfg: &ExtractionConfig,
) -> Result<PriceSignal, GatewayError> {
    if let Some(signal) = extract_rule_based(utterance, conversation_so_far, cfg) {
        return Ok(signal);
    }
    if !cfg.use_gateway_fallback {
        return Ok(PriceSignal::NoOffer);
    }
    let request = ChatRequest::new(CallSite::Extraction, prompts::EXTRACTION_INSTRUCTION)
        .user(prompts::extraction_message(utterance.trim()));
    let reply = gateway.complete(&request)?;
    Ok(parse_extraction_reply(&reply))
}
