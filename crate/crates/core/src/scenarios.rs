//! Built-in scenarios and loading of scenario files.

use std::fs;
use std::path::Path;

use crate::domain::{DomainError, Money, Role, Scenario};
use crate::prompts;

pub const USED_CAR_ID: &str = "used-car";
pub const SUMMER_SUBLEASE_ID: &str = "summer-sublease";

pub fn used_car() -> Scenario {
    Scenario {
        id: USED_CAR_ID.into(),
        item_description: "A used Honda Accord with about 50,000 miles, automatic transmission, \
air conditioning, power steering, windows and door locks, and a CD player. Dark green, no rust. \
Comparable cars sell for between $11,000 and $15,000. You have been approved for a loan of \
at most $13,500."
            .into(),
        market_min: Money(11000),
        market_max: Money(15000),
        budget: Some(Money(13500)),
        counterpart_reservation: Money(12000),
        learner_role: Role::Buyer,
        unrealistic_floor: Money(8000),
        agent_prompt_template: prompts::USED_CAR_AGENT_TEMPLATE.into(),
        guardrail_reply: None,
    }
}

pub fn summer_sublease() -> Scenario {
    Scenario {
        id: SUMMER_SUBLEASE_ID.into(),
        item_description: "A furnished one-bedroom apartment sublet for the summer (June through \
August), a ten minute walk from campus, utilities included. Comparable summer sublets go for \
between $6,500 and $9,000 in total. Your summer housing allowance is $8,000."
            .into(),
        market_min: Money(6500),
        market_max: Money(9000),
        budget: Some(Money(8000)),
        counterpart_reservation: Money(6800),
        learner_role: Role::Buyer,
        unrealistic_floor: Money(5000),
        agent_prompt_template: prompts::SUBLEASE_AGENT_TEMPLATE.into(),
        guardrail_reply: Some(
            "That's a very unrealistic price. Please start with an offer that aligns with the \
market range for this kind of sublease. Otherwise I can't take time to talk with you about this \
apartment."
                .into(),
        ),
    }
}

pub fn builtin() -> Vec<Scenario> {
    vec![used_car(), summer_sublease()]
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error(transparent)]
    Invalid(#[from] DomainError),
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioLoadError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ScenarioLoadError::Io {
        path: shown.clone(),
        source,
    })?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|source| ScenarioLoadError::Parse { path: shown, source })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Every `*.json` file in `dir`, sorted by id.
pub fn load_scenario_dir(dir: impl AsRef<Path>) -> Result<Vec<Scenario>, ScenarioLoadError> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| ScenarioLoadError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| ScenarioLoadError::Io { path: dir.display().to_string(), source })?
            .path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(load_scenario(&path)?);
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}
