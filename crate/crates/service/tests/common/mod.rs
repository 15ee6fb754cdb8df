#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use coach_core::{Condition, FeedbackBundle, ModelGateway, Money, PreparationSheet, StubGateway, StubScript};
use coach_service::{Clock, Coach, ManualClock, Phase, ServiceConfig, Session, SessionStore};
use serde_json::Value;

pub const HOLISTIC: &str = "When you said \"I could do $11,400\" you gave up ground quickly. Open with a question next time.";
pub const SUGGESTIONS: &str = "1. Ask about the car's history before naming a price.\n2. Explain why your offer is fair.\n3. Make smaller concessions.";

pub fn start() -> DateTime<Utc> {
    DateTime::from_timestamp(1_750_000_000, 0).unwrap()
}

pub fn script() -> StubScript {
    StubScript::new()
        .substring("Rationale :Answer here", "Rationale :False")
        .substring("Breaking the ice :Answer here", "True")
        .substring("Strategic closing :Answer here", "True")
        .substring("Given the negotiation transcript:", HOLISTIC)
        .substring("Give three suggestions", SUGGESTIONS)
        .with_default("ANSWER: Keep your offers closer to your target.")
}

pub fn stub() -> Arc<dyn ModelGateway> {
    Arc::new(StubGateway::new(script()))
}

pub fn config(store: &Path) -> ServiceConfig {
    ServiceConfig { store_path: store.to_path_buf(), ..ServiceConfig::default() }
}

/// A coach on a manual clock that ticks 20 seconds per reading.
pub fn coach(store: &Path) -> Coach {
    coach_with(config(store), stub())
}

pub fn coach_with(cfg: ServiceConfig, gateway: Arc<dyn ModelGateway>) -> Coach {
    coach_on(cfg, gateway, Arc::new(ManualClock::stepping(start(), Duration::seconds(20))))
}

pub fn coach_on(cfg: ServiceConfig, gateway: Arc<dyn ModelGateway>, clock: Arc<dyn Clock>) -> Coach {
    coach_service::build_coach(cfg, gateway, clock).unwrap()
}

/// The stub script in the file format the server reads.
pub fn script_json() -> String {
    let s = script();
    let mut entries: Vec<Value> = s.entries.iter().map(|e| serde_json::to_value(e).unwrap()).collect();
    entries.push(serde_json::json!({ "match": { "kind": "default" }, "reply": s.default_reply }));
    serde_json::to_string_pretty(&entries).unwrap()
}

pub fn reopen(store: &Path) -> SessionStore {
    SessionStore::open(store).unwrap()
}

pub fn car_prep() -> PreparationSheet {
    PreparationSheet { walk_away: Money(13500), target: Money(12500), planned_opening: Money(11000) }
}

pub fn sublease_prep() -> PreparationSheet {
    PreparationSheet { walk_away: Money(8000), target: Money(7200), planned_opening: Money(6600) }
}

pub const CAR_LINES: [&str; 7] = [
    "Hi, I'm interested in the Honda Accord.",
    "What are you asking for it?",
    "How about $11,000?",
    "I could do $11,400.",
    "Has it had any accidents?",
    "Then $11,700.",
    "I can pay $12,000.",
];

pub const SUBLEASE_LINES: [&str; 6] = [
    "Hi, I'm interested in the apartment for the summer.",
    "What are you asking for it?",
    "How about $6,000?",
    "I could do $6,300.",
    "Then $6,600.",
    "I can pay $6,800.",
];

/// Sends the lines until a deal is struck, closing with "Deal." if none was.
pub fn negotiate(coach: &Coach, id: &str, lines: &[&str]) -> Money {
    for line in lines.iter().copied().chain(std::iter::once("Deal.")) {
        let reply = coach.post_message(id, line).unwrap();
        if let Some(deal) = reply.deal {
            assert_eq!(reply.phase, Phase::FeedbackReady);
            return deal;
        }
    }
    panic!("no deal reached");
}

pub fn answers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("Answer {i}: I will anchor lower and explain my reasons.")).collect()
}

pub struct TwoTrials {
    pub first: Session,
    pub second: Session,
    pub bundle: FeedbackBundle,
    pub second_bundle: FeedbackBundle,
}

pub fn two_trials(coach: &Coach, condition: Condition, seed: u64) -> TwoTrials {
    let s = coach.create_session("used-car", condition, Some(seed)).unwrap();
    coach.submit_preparation(&s.id, car_prep()).unwrap();
    negotiate(coach, &s.id, &CAR_LINES);
    let bundle = coach.get_feedback(&s.id).unwrap();
    let n = coach.get_session(&s.id).unwrap().reflection_questions.len();
    coach.submit_reflection(&s.id, answers(n)).unwrap();
    let second = coach.start_second_trial(&s.id).unwrap();
    coach.submit_preparation(&second.id, sublease_prep()).unwrap();
    negotiate(coach, &second.id, &SUBLEASE_LINES);
    let second_bundle = coach.get_feedback(&second.id).unwrap();
    coach.submit_reflection(&second.id, Vec::new()).unwrap();
    TwoTrials {
        first: coach.get_session(&s.id).unwrap(),
        second: coach.get_session(&second.id).unwrap(),
        bundle,
        second_bundle,
    }
}

/// Replaces session ids with their order of first appearance so runs with
/// fresh random ids compare equal.
pub fn normalize_ids(value: &mut Value, seen: &mut Vec<String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if matches!(k.as_str(), "id" | "previous_session" | "second_trial") {
                    if let Value::String(s) = v {
                        let pos = seen.iter().position(|x| x == s).unwrap_or_else(|| {
                            seen.push(s.clone());
                            seen.len() - 1
                        });
                        *v = Value::String(format!("session-{pos}"));
                    }
                } else {
                    normalize_ids(v, seen);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| normalize_ids(v, seen)),
        _ => {}
    }
}

/// Drops wall-clock fields for comparisons across processes.
pub fn strip_times(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for k in ["created_at", "updated_at", "timestamp", "duration_seconds"] {
                map.remove(k);
            }
            map.values_mut().for_each(strip_times);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_times),
        _ => {}
    }
}
