//! The five baseline bidders.
//!
//! | agent            | bid                                                          |
//! |------------------|--------------------------------------------------------------|
//! | Naive            | direct distance from its current city times cost, plus noise |
//! | ExpCostFixedBid  | mean marginal cost of 10 synthetic tasks, every round        |
//! | Honest           | own cheapest-insertion marginal cost                         |
//! | ModelOpponent    | max(own marginal, shadow-fleet marginal)                     |
//! | RiskSeeking      | max of both marginals, each blended with the prior by γ^t    |
//!
//! All but Naive finish with local search and keep the insertion plan if it
//! is cheaper.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;

use super::fleet::{FleetState, OpponentModel, SyntheticPrior};
use super::{Agent, AgentContext, AgentError, AgentTuning, AuctionObservation, BidResponse};
use crate::model::{plan_cost, Plan, Task, CAPACITY_EPS};
use crate::planning::{sls_optimize, Deadline, SlsConfig};
use crate::rng::SimRng;
use crate::topology::{CityId, Topology};

fn not_set_up() -> AgentError {
    AgentError::Crashed("agent used before setup".into())
}

/// Common state of the insertion-based bidders.
struct Core {
    agent_id: usize,
    topology: Arc<Topology>,
    own: FleetState,
    rng: SimRng,
    t_plan_ms: u64,
}

impl Core {
    fn new(ctx: &AgentContext) -> Self {
        Self {
            agent_id: ctx.agent_id,
            topology: ctx.topology.clone(),
            own: FleetState::new(ctx.company.clone()),
            rng: SimRng::seed_from_u64(ctx.seed),
            t_plan_ms: ctx.t_plan_ms,
        }
    }

    fn own_marginal(&mut self, task: &Task) -> Option<f64> {
        self.own.marginal(task, self.topology.dist())
    }

    /// Local search with a reproducible iteration budget, falling back to the
    /// insertion plan when that is cheaper.
    fn final_plan(&mut self, won: &[Task], tuning: &AgentTuning) -> Result<Plan, AgentError> {
        let started = Instant::now();
        let budget = Duration::from_secs_f64(self.t_plan_ms as f64 * tuning.plan_time_share / 1000.0);
        let deadline = Deadline::iterations(tuning.sls_iterations).with_instant(started + budget);
        let dist = self.topology.dist();
        let company = &self.own.company;
        let out = sls_optimize(won, company, dist, deadline, &mut self.rng, SlsConfig::default())?;
        if let Some(tentative) = self.own.plan_for(won) {
            if plan_cost(tentative, company, dist) < out.cost {
                return Ok(tentative.clone());
            }
        }
        Ok(out.plan)
    }
}

fn non_negative(v: f64) -> BidResponse {
    BidResponse::Bid(v.max(0.0))
}

/// Bids the direct trip from its current city, with up to 5% noise, and
/// serves every won task in order with its first vehicle only.
pub struct Naive {
    tuning: AgentTuning,
    state: Option<NaiveState>,
}

struct NaiveState {
    agent_id: usize,
    topology: Arc<Topology>,
    vehicles: usize,
    home: CityId,
    capacity: f64,
    cost_per_km: f64,
    sequence: Vec<Task>,
    rng: SimRng,
}

impl Naive {
    pub fn new(tuning: AgentTuning) -> Self {
        Self { tuning, state: None }
    }

    /// Last delivery city of the tentative sequential route, else home.
    pub fn current_city(&self) -> Option<CityId> {
        self.state
            .as_ref()
            .map(|s| s.sequence.last().map_or(s.home, |t| t.delivery))
    }
}

impl Agent for Naive {
    fn name(&self) -> &str {
        "Naive"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        let v = ctx.company.vehicles[0];
        self.state = Some(NaiveState {
            agent_id: ctx.agent_id,
            topology: ctx.topology.clone(),
            vehicles: ctx.company.vehicles.len(),
            home: v.home,
            capacity: v.capacity,
            cost_per_km: v.cost_per_km,
            sequence: Vec::new(),
            rng: SimRng::seed_from_u64(ctx.seed),
        });
        Ok(())
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let at = self.current_city().ok_or_else(not_set_up)?;
        let noise = self.tuning.naive_noise;
        let s = self.state.as_mut().ok_or_else(not_set_up)?;
        let u: f64 = s.rng.gen_range(0.0..=noise);
        if task.weight > s.capacity + CAPACITY_EPS {
            return Ok(BidResponse::Abstain);
        }
        let km = s.topology.distance(at, task.pickup) + s.topology.distance(task.pickup, task.delivery);
        Ok(BidResponse::Bid(km * s.cost_per_km * (1.0 + u)))
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        let s = self.state.as_mut().ok_or_else(not_set_up)?;
        if obs.winner == Some(s.agent_id) {
            s.sequence.push(obs.task);
        }
        Ok(())
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let s = self.state.as_ref().ok_or_else(not_set_up)?;
        let mut ordered = Vec::with_capacity(won.len());
        for t in &s.sequence {
            if won.iter().any(|w| w.id == t.id) {
                ordered.push(*t);
            }
        }
        // anything the engine says we won but we never saw goes last, by id
        let mut rest: Vec<Task> = won
            .iter()
            .filter(|w| !ordered.iter().any(|t| t.id == w.id))
            .copied()
            .collect();
        rest.sort_by_key(|t| t.id);
        ordered.extend(rest);
        Ok(Plan::sequential(s.vehicles, 0, &ordered))
    }
}

/// Bids a constant: the mean marginal cost of synthetic tasks drawn at setup.
pub struct ExpCostFixedBid {
    tuning: AgentTuning,
    core: Option<Core>,
    prior: Option<SyntheticPrior>,
}

impl ExpCostFixedBid {
    pub fn new(tuning: AgentTuning) -> Self {
        Self {
            tuning,
            core: None,
            prior: None,
        }
    }

    pub fn prior(&self) -> Option<&SyntheticPrior> {
        self.prior.as_ref()
    }
}

impl Agent for ExpCostFixedBid {
    fn name(&self) -> &str {
        "ExpCostFixedBid"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        let mut core = Core::new(ctx);
        self.prior = Some(SyntheticPrior::sample(
            self.tuning.synthetic_tasks,
            &ctx.distribution,
            &ctx.company,
            ctx.topology.dist(),
            &mut core.rng,
        ));
        self.core = Some(core);
        Ok(())
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let core = self.core.as_mut().ok_or_else(not_set_up)?;
        // a task no vehicle can carry would force a forfeit if won
        if core.own_marginal(task).is_none() {
            return Ok(BidResponse::Abstain);
        }
        Ok(non_negative(self.prior.as_ref().ok_or_else(not_set_up)?.mean))
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        let core = self.core.as_mut().ok_or_else(not_set_up)?;
        if obs.winner == Some(core.agent_id) {
            let dist = core.topology.clone();
            core.own.commit(&obs.task, dist.dist());
        }
        Ok(())
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let tuning = self.tuning;
        self.core.as_mut().ok_or_else(not_set_up)?.final_plan(won, &tuning)
    }
}

/// Bids its own marginal cost: the cheapest insertion of the task into the
/// current plan over all vehicles and positions.
pub struct Honest {
    tuning: AgentTuning,
    core: Option<Core>,
}

impl Honest {
    pub fn new(tuning: AgentTuning) -> Self {
        Self { tuning, core: None }
    }

    pub fn fleet(&self) -> Option<&FleetState> {
        self.core.as_ref().map(|c| &c.own)
    }
}

impl Agent for Honest {
    fn name(&self) -> &str {
        "Honest"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.core = Some(Core::new(ctx));
        Ok(())
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let core = self.core.as_mut().ok_or_else(not_set_up)?;
        Ok(core.own_marginal(task).map_or(BidResponse::Abstain, non_negative))
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        let core = self.core.as_mut().ok_or_else(not_set_up)?;
        if obs.winner == Some(core.agent_id) {
            let topo = core.topology.clone();
            if !core.own.commit(&obs.task, topo.dist()) {
                return Err(AgentError::Crashed(format!("won uncarriable task {}", obs.task.id)));
            }
        }
        Ok(())
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let tuning = self.tuning;
        self.core.as_mut().ok_or_else(not_set_up)?.final_plan(won, &tuning)
    }
}

/// Own state plus a shadow fleet tracking what opponents won.
struct Modeled {
    core: Core,
    opponent: OpponentModel,
}

impl Modeled {
    fn new(ctx: &AgentContext) -> Self {
        Self {
            core: Core::new(ctx),
            opponent: OpponentModel::new(&ctx.company, ctx.opponent_vehicles),
        }
    }

    fn marginals(&mut self, task: &Task) -> (Option<f64>, Option<f64>) {
        let topo = self.core.topology.clone();
        (self.core.own_marginal(task), self.opponent.marginal(task, topo.dist()))
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        let topo = self.core.topology.clone();
        match obs.winner {
            Some(w) if w == self.core.agent_id => {
                if !self.core.own.commit(&obs.task, topo.dist()) {
                    return Err(AgentError::Crashed(format!("won uncarriable task {}", obs.task.id)));
                }
            }
            Some(_) => self.opponent.opponent_won(&obs.task, topo.dist()),
            None => {}
        }
        Ok(())
    }
}

/// Bids the larger of its own marginal cost and the marginal cost of a shadow
/// fleet (own specs) serving the opponent's won tasks.
pub struct ModelOpponent {
    tuning: AgentTuning,
    inner: Option<Modeled>,
}

impl ModelOpponent {
    pub fn new(tuning: AgentTuning) -> Self {
        Self { tuning, inner: None }
    }

    pub fn opponent_model(&self) -> Option<&OpponentModel> {
        self.inner.as_ref().map(|m| &m.opponent)
    }

    pub fn fleet(&self) -> Option<&FleetState> {
        self.inner.as_ref().map(|m| &m.core.own)
    }
}

impl Agent for ModelOpponent {
    fn name(&self) -> &str {
        "ModelOpponent"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.inner = Some(Modeled::new(ctx));
        Ok(())
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let m = self.inner.as_mut().ok_or_else(not_set_up)?;
        Ok(match m.marginals(task) {
            (None, _) => BidResponse::Abstain,
            (Some(own), None) => non_negative(own),
            (Some(own), Some(shadow)) => non_negative(own.max(shadow)),
        })
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        self.inner.as_mut().ok_or_else(not_set_up)?.observe(obs)
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let tuning = self.tuning;
        self.inner.as_mut().ok_or_else(not_set_up)?.core.final_plan(won, &tuning)
    }
}

/// Shifts from a synthetic prior towards marginal cost with weight γ^t on the
/// prior in round t, for itself and for the shadow fleet, and bids the larger
/// blend.
pub struct RiskSeeking {
    tuning: AgentTuning,
    inner: Option<Modeled>,
    prior: Option<SyntheticPrior>,
    round: usize,
}

impl RiskSeeking {
    pub fn new(tuning: AgentTuning) -> Self {
        Self {
            tuning,
            inner: None,
            prior: None,
            round: 0,
        }
    }

    pub fn prior(&self) -> Option<&SyntheticPrior> {
        self.prior.as_ref()
    }

    /// Weight of the prior in the current round.
    pub fn prior_weight(&self) -> f64 {
        self.tuning.risk_gamma.powi(self.round as i32)
    }

    pub fn blend(prior: f64, marginal: f64, alpha: f64) -> f64 {
        alpha * prior + (1.0 - alpha) * marginal
    }
}

impl Agent for RiskSeeking {
    fn name(&self) -> &str {
        "RiskSeeking"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        let mut inner = Modeled::new(ctx);
        self.prior = Some(SyntheticPrior::sample(
            self.tuning.synthetic_tasks,
            &ctx.distribution,
            &ctx.company,
            ctx.topology.dist(),
            &mut inner.core.rng,
        ));
        self.inner = Some(inner);
        self.round = 0;
        Ok(())
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let alpha = self.prior_weight();
        let prior = self.prior.as_ref().ok_or_else(not_set_up)?.mean;
        let m = self.inner.as_mut().ok_or_else(not_set_up)?;
        Ok(match m.marginals(task) {
            (None, _) => BidResponse::Abstain,
            (Some(own), None) => non_negative(Self::blend(prior, own, alpha)),
            (Some(own), Some(shadow)) => {
                non_negative(Self::blend(prior, own, alpha).max(Self::blend(prior, shadow, alpha)))
            }
        })
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        self.round += 1;
        self.inner.as_mut().ok_or_else(not_set_up)?.observe(obs)
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let tuning = self.tuning;
        self.inner.as_mut().ok_or_else(not_set_up)?.core.final_plan(won, &tuning)
    }
}
