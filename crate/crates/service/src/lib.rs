//! HTTP service for the negotiation coach: learner sessions, the practice
//! chat with the counterpart agent, feedback delivery, reflection and the
//! two-trial flow, persisted in an embedded store.

pub mod api;
pub mod clock;
pub mod coach;
pub mod config;
pub mod session;
pub mod store;

use std::sync::Arc;

use coach_core::{scenarios, ModelGateway, Scenario};

pub use api::router;
pub use clock::{Clock, ManualClock, SystemClock};
pub use coach::{Coach, CoachError, MessageReply};
pub use config::ServiceConfig;
pub use session::{Phase, ScenarioView, Session, SessionView};
pub use store::{SessionStore, StoreError};

/// Built-in scenarios, with any from the configured directory replacing
/// those of the same id.
pub fn load_scenarios(cfg: &ServiceConfig) -> anyhow::Result<Vec<Scenario>> {
    let mut all = scenarios::builtin();
    if let Some(dir) = &cfg.scenario_dir {
        for s in scenarios::load_scenario_dir(dir)? {
            all.retain(|b| b.id != s.id);
            all.push(s);
        }
    }
    Ok(all)
}

/// Opens the store and wires up a coach from configuration.
pub fn build_coach(
    cfg: ServiceConfig,
    gateway: Arc<dyn ModelGateway>,
    clock: Arc<dyn Clock>,
) -> anyhow::Result<Coach> {
    let scenarios = load_scenarios(&cfg)?;
    let store = SessionStore::open(&cfg.store_path)?;
    Ok(Coach::new(cfg, store, scenarios, gateway, clock))
}
