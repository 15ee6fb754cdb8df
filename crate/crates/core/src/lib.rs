//! Negotiation coaching primitives.
//!
//! The crate is organised bottom-up: [`domain`] holds the shared value types,
//! [`extraction`] reads prices out of utterances, [`detection`] judges the
//! eight tactical categories, [`agent`] plays the counterpart, and
//! [`feedback`] turns detected mistakes into coaching text. Every model call
//! goes through a [`gateway::ModelGateway`].

pub mod agent;
pub mod detection;
pub mod domain;
pub mod extraction;
pub mod feedback;
pub mod gateway;
pub mod prompts;
pub mod scenarios;

pub use domain::*;
pub use extraction::{extract_price_signal, extract_rule_based, parse_extraction_reply, ExtractionConfig};
pub use gateway::{ChatRequest, GatewayError, ModelGateway, StubGateway, StubScript};
