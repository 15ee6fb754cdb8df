//! Batched buyer-policy versus seller negotiations.

use std::fmt::Write as _;
use std::io::{Read, Write};

use chrono::{DateTime, Duration, Utc};
use coach_core::agent::{next_agent_message, AgentConfig, AgentState, AgentVoice, DEFAULT_CONVERGENCE_TURN};
use coach_core::feedback::other_feedback;
use coach_core::gateway::CallSite;
use coach_core::{
    extract_price_signal, ChatRequest, ExtractionConfig, GatewayError, ModelGateway, Money, PriceSignal, Role,
    Scenario, Speaker, Transcript,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    #[default]
    None,
    ThreeSuggestions,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::None => "none",
            FeedbackMode::ThreeSuggestions => "three_suggestions",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BuyerPolicy {
    /// Offers `start`, then `start + step`, ... capped at `max`.
    Scripted { start: i64, step: i64, max: i64 },
    /// Per-run random schedule with chatter and the odd lowball.
    Random,
    /// Model-written buyer turns.
    Gateway,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SellerPolicy {
    /// The negotiation agent.
    Agent,
    /// Asks `start`, then `start - step`, ... floored at `min`.
    Scripted { start: i64, step: i64, min: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub runs: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_scenario")]
    pub scenario: String,
    #[serde(default)]
    pub feedback_mode: FeedbackMode,
    #[serde(default = "default_max_turns")]
    pub max_turns: usize,
    #[serde(default = "default_seconds_per_turn")]
    pub seconds_per_turn: f64,
    #[serde(default = "default_convergence")]
    pub convergence_turn: u32,
    #[serde(default)]
    pub agent_voice: AgentVoice,
    pub buyer: BuyerPolicy,
    #[serde(default = "default_seller")]
    pub seller: SellerPolicy,
}

fn default_workers() -> usize {
    4
}
fn default_scenario() -> String {
    coach_core::scenarios::USED_CAR_ID.to_owned()
}
fn default_max_turns() -> usize {
    40
}
fn default_seconds_per_turn() -> f64 {
    20.0
}
fn default_convergence() -> u32 {
    DEFAULT_CONVERGENCE_TURN
}
fn default_seller() -> SellerPolicy {
    SellerPolicy::Agent
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: usize,
    pub deal_price: Option<i64>,
    pub turns: usize,
    pub duration_s: f64,
    pub feedback_mode: String,
}

/// A finished run with the trace the safety checks need.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub row: RunRow,
    pub transcript: Transcript,
    /// Agent subjective limits after each agent turn, starting with the
    /// initial draw. Empty for a scripted seller.
    pub limit_history: Vec<Money>,
    /// Prices the seller put on the table, in order.
    pub seller_offers: Vec<Money>,
    pub error: Option<String>,
}

pub fn run_seed(base: u64, run_id: usize) -> u64 {
    base.wrapping_add((run_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs the batch on a pool of `cfg.workers` threads; results are sorted by
/// run id.
pub fn simulate(cfg: &SimConfig, scenario: &Scenario, gateway: &dyn ModelGateway) -> Result<Vec<RunOutcome>, EvalError> {
    if scenario.learner_role != Role::Buyer {
        return Err(EvalError::Config(format!("scenario {} does not have a buyer learner", scenario.id)));
    }
    if cfg.max_turns == 0 {
        return Err(EvalError::Config("max_turns must be positive".into()));
    }
    if let BuyerPolicy::Scripted { step, .. } = cfg.buyer {
        if step < 0 {
            return Err(EvalError::Config("buyer step must be nonnegative".into()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| EvalError::Config(e.to_string()))?;
    let mut out: Vec<RunOutcome> =
        pool.install(|| (0..cfg.runs).into_par_iter().map(|i| run_one(cfg, scenario, gateway, i)).collect());
    out.sort_by_key(|o| o.row.run_id);
    Ok(out)
}

enum Seller {
    Agent(AgentState),
    Scripted { next_ask: i64, step: i64, min: i64, standing: Option<i64> },
}

impl Seller {
    fn standing(&self) -> Option<Money> {
        match self {
            Seller::Agent(s) => s.last_agent_offer,
            Seller::Scripted { standing, .. } => standing.map(Money),
        }
    }
}

trait Buyer {
    /// The buyer's next message and its signal, given the transcript so far.
    fn speak(&mut self, transcript: &Transcript, standing: Option<Money>) -> Result<(String, PriceSignal), GatewayError>;
}

struct ScriptedBuyer {
    next: i64,
    step: i64,
    max: i64,
}

impl Buyer for ScriptedBuyer {
    fn speak(&mut self, _: &Transcript, standing: Option<Money>) -> Result<(String, PriceSignal), GatewayError> {
        if standing.is_some_and(|ask| ask.get() <= self.next) {
            return Ok(("That works for me, I'll take it.".into(), PriceSignal::Accepted));
        }
        let offer = self.next;
        self.next = (self.next + self.step).min(self.max.max(offer));
        Ok((format!("I can offer {}.", Money(offer)), PriceSignal::Offer { amount: Money(offer) }))
    }
}

struct RandomBuyer {
    rng: ChaCha8Rng,
    inner: ScriptedBuyer,
    lowball: i64,
}

impl RandomBuyer {
    fn new(scenario: &Scenario, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (scenario.market_min.get(), scenario.market_max.get());
        let start = rng.random_range(scenario.unrealistic_floor.get()..=hi);
        let step = rng.random_range(0..=(hi - lo).max(1) / 3);
        let max = rng.random_range(start..=hi + (hi - lo) / 4);
        let lowball = (scenario.unrealistic_floor.get() - rng.random_range(1..=1000)).max(1);
        RandomBuyer { rng, inner: ScriptedBuyer { next: start, step, max }, lowball }
    }
}

impl Buyer for RandomBuyer {
    fn speak(&mut self, t: &Transcript, standing: Option<Money>) -> Result<(String, PriceSignal), GatewayError> {
        let roll: f64 = self.rng.random();
        if roll < 0.15 {
            return Ok(("Can you tell me more about its history?".into(), PriceSignal::NoOffer));
        }
        if roll < 0.22 {
            let x = Money(self.lowball);
            return Ok((format!("Would you take {x}?"), PriceSignal::Offer { amount: x }));
        }
        if roll < 0.27 && standing.is_none() {
            return Ok(("Sounds good.".into(), PriceSignal::Accepted));
        }
        self.inner.speak(t, standing)
    }
}

const BUYER_SYSTEM: &str = "You are buying {item}. Comparable listings run {min} to {max}. \
Get the lowest price you can and never pay more than {budget}. Reply with one short message to the seller. \
Say \"I'll take it\" only when you accept the seller's current price.";

struct GatewayBuyer<'a> {
    gateway: &'a dyn ModelGateway,
    system: String,
}

impl<'a> GatewayBuyer<'a> {
    fn new(gateway: &'a dyn ModelGateway, scenario: &Scenario, suggestions: Option<&str>) -> Self {
        let budget = scenario.budget.unwrap_or(scenario.market_max);
        let mut system = BUYER_SYSTEM
            .replace("{item}", &scenario.item_description)
            .replace("{min}", &scenario.market_min.to_string())
            .replace("{max}", &scenario.market_max.to_string())
            .replace("{budget}", &budget.to_string());
        if let Some(s) = suggestions {
            system.push_str("\n\nApply this advice from an earlier practice round:\n");
            system.push_str(s);
        }
        GatewayBuyer { gateway, system }
    }
}

impl Buyer for GatewayBuyer<'_> {
    fn speak(&mut self, t: &Transcript, _: Option<Money>) -> Result<(String, PriceSignal), GatewayError> {
        let mut req = ChatRequest::new(CallSite::Simulation, self.system.clone());
        if t.turns.is_empty() {
            req = req.user("(The seller greets you.)");
        }
        for turn in &t.turns {
            req = match turn.speaker {
                Speaker::Learner => req.assistant(&turn.text),
                Speaker::Agent => req.user(&turn.text),
            };
        }
        let text = self.gateway.complete(&req)?.trim().to_owned();
        let signal = extract_price_signal(&text, &t.turns, self.gateway, &ExtractionConfig::default())?;
        Ok((text, signal))
    }
}

fn start_time() -> DateTime<Utc> {
    DateTime::from_timestamp(1_700_000_000, 0).expect("valid timestamp")
}

/// One negotiation. Returns the outcome even when a gateway error cut it
/// short.
fn negotiate(
    cfg: &SimConfig,
    scenario: &Scenario,
    gateway: &dyn ModelGateway,
    buyer: &mut dyn Buyer,
    seed: u64,
) -> (Transcript, Vec<Money>, Vec<Money>, Option<String>) {
    let mut transcript = Transcript::new(&scenario.id);
    let mut seller = match &cfg.seller {
        SellerPolicy::Agent => match AgentState::new(scenario, seed, cfg.convergence_turn) {
            Ok(s) => Seller::Agent(s),
            Err(e) => return (transcript, Vec::new(), Vec::new(), Some(e.to_string())),
        },
        SellerPolicy::Scripted { start, step, min } => {
            Seller::Scripted { next_ask: *start, step: *step, min: *min, standing: None }
        }
    };
    let mut limits = match &seller {
        Seller::Agent(s) => s.limit_history.clone(),
        Seller::Scripted { .. } => Vec::new(),
    };
    let mut offers = Vec::new();
    let agent_cfg = AgentConfig { convergence_turn: cfg.convergence_turn, voice: cfg.agent_voice };
    let at = |i: usize| start_time() + Duration::milliseconds((cfg.seconds_per_turn * 1000.0 * i as f64) as i64);

    while transcript.turns.len() < cfg.max_turns {
        let (text, signal) = match buyer.speak(&transcript, seller.standing()) {
            Ok(x) => x,
            Err(e) => return (transcript, limits, offers, Some(e.to_string())),
        };
        transcript.push(Speaker::Learner, text, signal, at(transcript.turns.len()));
        if transcript.turns.len() >= cfg.max_turns {
            break;
        }
        let (reply, reply_signal, deal) = match &mut seller {
            Seller::Agent(state) => match next_agent_message(state, scenario, &transcript, gateway, &agent_cfg) {
                Ok((reply, next)) => {
                    *state = next;
                    limits = state.limit_history.clone();
                    (reply.text, reply.signal, reply.deal)
                }
                Err(e) => return (transcript, limits, offers, Some(e.to_string())),
            },
            Seller::Scripted { next_ask, step, min, standing } => {
                let bid = signal.representative(Role::Buyer);
                match (signal, bid) {
                    (_, Some(b)) if b.get() >= *next_ask => {
                        (format!("You have a deal at {b}."), PriceSignal::Accepted, Some(b))
                    }
                    (PriceSignal::Accepted, None) if standing.is_some() => {
                        let p = Money(standing.expect("checked"));
                        (format!("Agreed at {p}."), PriceSignal::Accepted, Some(p))
                    }
                    _ => {
                        let ask = *next_ask;
                        *standing = Some(ask);
                        *next_ask = (ask - *step).max(*min).min(ask);
                        (format!("I'm asking {}.", Money(ask)), PriceSignal::Offer { amount: Money(ask) }, None)
                    }
                }
            }
        };
        if let PriceSignal::Offer { amount } = reply_signal {
            offers.push(amount);
        }
        transcript.push(Speaker::Agent, reply, reply_signal, at(transcript.turns.len()));
        if let Some(d) = deal {
            transcript.deal = Some(d);
            break;
        }
    }
    transcript.duration_seconds = cfg.seconds_per_turn * transcript.turns.len() as f64;
    (transcript, limits, offers, None)
}

fn run_one(cfg: &SimConfig, scenario: &Scenario, gateway: &dyn ModelGateway, run_id: usize) -> RunOutcome {
    let seed = run_seed(cfg.seed, run_id);
    let mut result = match &cfg.buyer {
        BuyerPolicy::Scripted { start, step, max } => {
            negotiate(cfg, scenario, gateway, &mut ScriptedBuyer { next: *start, step: *step, max: *max }, seed)
        }
        BuyerPolicy::Random => negotiate(cfg, scenario, gateway, &mut RandomBuyer::new(scenario, seed), seed),
        BuyerPolicy::Gateway => {
            let first = negotiate(cfg, scenario, gateway, &mut GatewayBuyer::new(gateway, scenario, None), seed);
            match (cfg.feedback_mode, &first.3) {
                (FeedbackMode::ThreeSuggestions, None) => match other_feedback(&first.0, Role::Buyer, gateway) {
                    Ok(s) => {
                        let mut buyer = GatewayBuyer::new(gateway, scenario, Some(&s));
                        negotiate(cfg, scenario, gateway, &mut buyer, seed)
                    }
                    Err(e) => (first.0, first.1, first.2, Some(e.to_string())),
                },
                _ => first,
            }
        }
    };
    if let Some(e) = &result.3 {
        tracing::warn!(run_id, error = %e, "simulated run aborted");
        result.0.deal = None;
    }
    let (transcript, limit_history, seller_offers, error) = result;
    RunOutcome {
        row: RunRow {
            run_id,
            deal_price: transcript.deal.map(Money::get),
            turns: transcript.turns.len(),
            duration_s: transcript.duration_seconds,
            feedback_mode: cfg.feedback_mode.as_str().to_owned(),
        },
        transcript,
        limit_history,
        seller_offers,
        error,
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[RunRow]) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["run_id", "deal_price", "turns", "duration_s", "feedback_mode"])
        .map_err(|e| EvalError::Csv(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| EvalError::Csv(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRow>, EvalError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| EvalError::Csv(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub deals: usize,
    pub mean: f64,
    /// Sample standard deviation; zero with fewer than two deals.
    pub sd: f64,
}

/// Mean and SD of deal prices over runs that reached a deal. `None` for an
/// empty batch.
pub fn summarize(rows: &[RunRow]) -> Option<Summary> {
    if rows.is_empty() {
        return None;
    }
    let prices: Vec<f64> = rows.iter().filter_map(|r| r.deal_price).map(|p| p as f64).collect();
    let n = prices.len();
    let mean = if n == 0 { 0.0 } else { prices.iter().sum::<f64>() / n as f64 };
    let sd = if n < 2 {
        0.0
    } else {
        (prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Some(Summary { runs: rows.len(), deals: n, mean, sd })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchT {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

/// Welch's unequal-variance two-sample t test. `None` when either sample
/// has fewer than two values or both variances are zero.
pub fn welch_t(a: &[f64], b: &[f64]) -> Option<WelchT> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let (sa, sb) = (va / na, vb / nb);
    if sa + sb <= 0.0 {
        return None;
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some(WelchT { t, df, p_two_sided: 2.0 * (1.0 - dist.cdf(t.abs())) })
}

/// Welch test on the deal prices of two batches.
pub fn compare(a: &[RunRow], b: &[RunRow]) -> Option<WelchT> {
    let prices = |rows: &[RunRow]| rows.iter().filter_map(|r| r.deal_price).map(|p| p as f64).collect::<Vec<_>>();
    welch_t(&prices(a), &prices(b))
}

pub fn render_summary(s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "runs {}  deals {}  mean deal {:.2}  sd {:.2}", s.runs, s.deals, s.mean, s.sd);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use coach_core::scenarios::used_car;
    use coach_core::StubGateway;

    fn scripted(start: i64, step: i64, seller: SellerPolicy) -> SimConfig {
        SimConfig {
            runs: 3,
            seed: 1,
            workers: 2,
            scenario: "used-car".into(),
            feedback_mode: FeedbackMode::None,
            max_turns: 40,
            seconds_per_turn: 20.0,
            convergence_turn: 4,
            agent_voice: AgentVoice::Template,
            buyer: BuyerPolicy::Scripted { start, step, max: 20_000 },
            seller,
        }
    }

    #[test]
    fn toml_config() {
        let cfg = SimConfig::from_toml(
            "runs = 5\nseed = 9\n[buyer]\npolicy = \"scripted\"\nstart = 11000\nstep = 500\nmax = 13500\n",
        )
        .unwrap();
        assert_eq!(cfg.seller, SellerPolicy::Agent);
        assert_eq!(cfg.buyer, BuyerPolicy::Scripted { start: 11000, step: 500, max: 13500 });
        assert!(SimConfig::from_toml("runs = 1\nseed = 1\nbogus = 2\n[buyer]\npolicy = \"random\"\n").is_err());
    }

    #[test]
    fn scripted_meeting_in_the_middle() {
        // Buyer 11000 + 500k, seller 15000 - 500k: asks 15000, 14500, 14000, 13500;
        // bids 11000, 11500, 12000, 12500, 13000; seller accepts 13000 at k = 4.
        let cfg = scripted(11000, 500, SellerPolicy::Scripted { start: 15000, step: 500, min: 12000 });
        let out = simulate(&cfg, &used_car(), &StubGateway::default()).unwrap();
        for o in &out {
            assert_eq!(o.row.deal_price, Some(13000));
            assert_eq!(o.row.turns, 10);
            assert_eq!(o.row.duration_s, 200.0);
        }
    }

    #[test]
    fn zero_runs_is_empty() {
        let mut cfg = scripted(11000, 500, SellerPolicy::Agent);
        cfg.runs = 0;
        let out = simulate(&cfg, &used_car(), &StubGateway::default()).unwrap();
        assert!(out.is_empty());
        assert!(summarize(&[]).is_none());
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "run_id,deal_price,turns,duration_s,feedback_mode\n");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            RunRow { run_id: 0, deal_price: Some(13000), turns: 8, duration_s: 160.0, feedback_mode: "none".into() },
            RunRow { run_id: 1, deal_price: None, turns: 40, duration_s: 800.0, feedback_mode: "none".into() },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn agent_batch_is_deterministic_and_safe() {
        let mut cfg = scripted(9000, 400, SellerPolicy::Agent);
        cfg.runs = 50;
        let a = simulate(&cfg, &used_car(), &StubGateway::default()).unwrap();
        cfg.workers = 1;
        let b = simulate(&cfg, &used_car(), &StubGateway::default()).unwrap();
        assert_eq!(a, b);
        for o in &a {
            assert!(o.row.deal_price.unwrap() >= 12000, "{:?}", o.row);
        }
    }

    #[test]
    fn welch_hand_example() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let w = welch_t(&a, &b).unwrap();
        // means 2.5 and 6, variances 5/3 and 10.
        let se = (5.0f64 / 3.0 / 4.0 + 10.0 / 5.0).sqrt();
        assert!((w.t - (2.5 - 6.0) / se).abs() < 1e-12);
        assert!(w.p_two_sided > 0.0 && w.p_two_sided < 0.1);
        assert!(welch_t(&[1.0], &b).is_none());
        assert!(welch_t(&[1.0, 1.0], &[1.0, 1.0]).is_none());
    }
}
