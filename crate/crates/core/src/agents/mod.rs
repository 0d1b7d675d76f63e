//! The agent contract and the built-in agents.
//!
//! An agent lives for exactly one match. The engine calls [`Agent::setup`]
//! once, then for every auctioned task [`Agent::ask_bid`] followed (after the
//! winner is known) by [`Agent::observe`], and finally [`Agent::final_plan`]
//! with the tasks the agent won. Calls are never concurrent.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Company, Plan, Task, TaskDistribution};
use crate::planning::PlanningError;
use crate::topology::Topology;

pub mod baselines;
pub mod fleet;
pub mod variants;

pub use baselines::{ExpCostFixedBid, Honest, ModelOpponent, Naive, RiskSeeking};
pub use fleet::{FleetState, OpponentModel, SyntheticPrior};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent crashed: {0}")]
    Crashed(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("agent process exited: {0}")]
    Exited(String),
    #[error("agent did not answer within {0} ms")]
    Timeout(u64),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// What an agent learns at setup. Deliberately carries no task count.
#[derive(Debug, Clone)]
pub struct AgentContext {
    /// Slot of this agent in the match (index into observation bids).
    pub agent_id: usize,
    pub topology: Arc<Topology>,
    pub distribution: TaskDistribution,
    pub company: Company,
    /// Vehicle count of each opponent fleet, when the match reveals it.
    pub opponent_vehicles: Option<usize>,
    pub t_bid_ms: u64,
    pub t_plan_ms: u64,
    /// Seed of this agent's private random stream.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum BidResponse {
    Bid(f64),
    Abstain,
}

impl BidResponse {
    pub fn value(self) -> Option<f64> {
        match self {
            BidResponse::Bid(v) => Some(v),
            BidResponse::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidRecord {
    pub agent: usize,
    /// `None` marks an abstention (explicit, overrun or invalid).
    pub bid: Option<f64>,
}

/// Outcome of one auction round, broadcast to every agent after the winner
/// has been determined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionObservation {
    pub round: usize,
    pub task: Task,
    pub bids: Vec<BidRecord>,
    pub winner: Option<usize>,
    pub price: Option<f64>,
}

impl AuctionObservation {
    pub fn bid_of(&self, agent: usize) -> Option<f64> {
        self.bids.iter().find(|b| b.agent == agent).and_then(|b| b.bid)
    }
}

pub trait Agent {
    fn name(&self) -> &str;

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError>;

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError>;

    fn observe(&mut self, observation: &AuctionObservation) -> Result<(), AgentError>;

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError>;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        (**self).setup(ctx)
    }
    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        (**self).ask_bid(task)
    }
    fn observe(&mut self, observation: &AuctionObservation) -> Result<(), AgentError> {
        (**self).observe(observation)
    }
    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        (**self).final_plan(won)
    }
}

/// Never bids; returns an empty plan.
#[derive(Debug, Default, Clone)]
pub struct Abstainer {
    vehicles: usize,
}

impl Agent for Abstainer {
    fn name(&self) -> &str {
        "Abstainer"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.vehicles = ctx.company.vehicles.len();
        Ok(())
    }

    fn ask_bid(&mut self, _task: &Task) -> Result<BidResponse, AgentError> {
        Ok(BidResponse::Abstain)
    }

    fn observe(&mut self, _observation: &AuctionObservation) -> Result<(), AgentError> {
        Ok(())
    }

    fn final_plan(&mut self, _won: &[Task]) -> Result<Plan, AgentError> {
        Ok(Plan::empty(self.vehicles))
    }
}

/// Tunables shared by the SLS-planning baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentTuning {
    /// Iteration budget for the final-plan local search. The wall-clock
    /// deadline still applies; the budget keeps runs reproducible.
    pub sls_iterations: u64,
    /// Share of `t_plan` the local search may use before stopping.
    pub plan_time_share: f64,
    /// Synthetic tasks drawn for the fixed prior.
    pub synthetic_tasks: usize,
    /// Upper bound of Naive's multiplicative noise.
    pub naive_noise: f64,
    /// Per-round decay of RiskSeeking's prior weight.
    pub risk_gamma: f64,
}

impl Default for AgentTuning {
    fn default() -> Self {
        Self {
            sls_iterations: 5_000,
            plan_time_share: 0.8,
            synthetic_tasks: 10,
            naive_noise: 0.05,
            risk_gamma: 0.9,
        }
    }
}

pub const BUILTIN_AGENTS: [&str; 5] = ["Naive", "ExpCostFixedBid", "Honest", "ModelOpponent", "RiskSeeking"];

/// Built-in agent by name (case-insensitive). Includes the five baselines and
/// the `Abstainer` stub.
pub fn builtin(name: &str) -> Option<Box<dyn Agent + Send>> {
    builtin_with(name, AgentTuning::default())
}

pub fn builtin_with(name: &str, tuning: AgentTuning) -> Option<Box<dyn Agent + Send>> {
    let agent: Box<dyn Agent + Send> = match name.to_ascii_lowercase().as_str() {
        "naive" => Box::new(Naive::new(tuning)),
        "expcostfixedbid" | "expcost" => Box::new(ExpCostFixedBid::new(tuning)),
        "honest" => Box::new(Honest::new(tuning)),
        "modelopponent" => Box::new(ModelOpponent::new(tuning)),
        "riskseeking" => Box::new(RiskSeeking::new(tuning)),
        "abstainer" | "abstain" => Box::new(Abstainer::default()),
        _ => return None,
    };
    Some(agent)
}

/// Canonical display name for a built-in agent.
pub fn canonical_name(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "naive" => Some("Naive"),
        "expcostfixedbid" | "expcost" => Some("ExpCostFixedBid"),
        "honest" => Some("Honest"),
        "modelopponent" => Some("ModelOpponent"),
        "riskseeking" => Some("RiskSeeking"),
        "abstainer" | "abstain" => Some("Abstainer"),
        _ => None,
    }
}
