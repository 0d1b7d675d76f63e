//! Matches, company swaps, double all-play-all tournaments and the summary
//! table.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{builtin_with, Agent, AgentContext, AgentError, AgentTuning, AuctionObservation, BidResponse};
use crate::auction::{run_auction_round, AuctionConfig, AuctionLedger, ForfeitCause, DEFAULT_MAX_OVERRUNS};
use crate::model::{
    company_profit, plan_cost, sample_task, validate_plan, Company, ModelError, Plan, Task, TaskDistribution, Vehicle,
};
use crate::rng::{derive_seed, stream, streams};
use crate::topology::{CityId, Topology};

pub const RESULT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TournamentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("a tournament needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("a match needs one agent per company: {agents} agents, {companies} companies")]
    SlotMismatch { agents: usize, companies: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Vehicle parameters; a missing home is drawn per match from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub capacity: f64,
    pub cost_per_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<CityId>,
}

impl VehicleSpec {
    pub const fn new(capacity: f64, cost_per_km: f64) -> Self {
        Self {
            capacity,
            cost_per_km,
            home: None,
        }
    }
}

/// Two companies of two vehicles with capacities 30 and 54 kg each. The
/// per-km costs differ so that company assignment matters.
pub fn default_fleets() -> Vec<Vec<VehicleSpec>> {
    vec![
        vec![VehicleSpec::new(30.0, 5.0), VehicleSpec::new(54.0, 7.0)],
        vec![VehicleSpec::new(54.0, 6.0), VehicleSpec::new(30.0, 4.0)],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    pub tasks: usize,
    pub weight_min: f64,
    pub weight_max: f64,
    pub t_bid_ms: u64,
    pub t_plan_ms: u64,
    pub max_overruns: usize,
    /// One fleet per company; slot i of a match controls company i.
    pub fleets: Vec<Vec<VehicleSpec>>,
    /// Whether agents are told the opponent's vehicle count.
    pub reveal_opponent_fleet: bool,
    pub tuning: AgentTuning,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tasks: 50,
            weight_min: crate::model::DEFAULT_WEIGHT_RANGE.0,
            weight_max: crate::model::DEFAULT_WEIGHT_RANGE.1,
            t_bid_ms: 5_000,
            t_plan_ms: 30_000,
            max_overruns: DEFAULT_MAX_OVERRUNS,
            fleets: default_fleets(),
            reveal_opponent_fleet: true,
            tuning: AgentTuning::default(),
        }
    }
}

impl MatchConfig {
    pub fn check(&self) -> Result<(), TournamentError> {
        if self.t_bid_ms == 0 || self.t_plan_ms == 0 {
            return Err(TournamentError::Config("deadlines must be positive".into()));
        }
        if self.fleets.len() < 2 {
            return Err(TournamentError::Config("need at least two fleets".into()));
        }
        if let Some(c) = self.fleets.iter().position(|f| f.is_empty()) {
            return Err(ModelError::EmptyFleet(c).into());
        }
        TaskDistribution::new(2, self.weight_min, self.weight_max)?;
        Ok(())
    }

    pub fn auction(&self) -> AuctionConfig {
        AuctionConfig {
            t_bid_ms: self.t_bid_ms,
            max_overruns: self.max_overruns,
        }
    }

    pub fn distribution(&self, topology: &Topology) -> Result<TaskDistribution, ModelError> {
        TaskDistribution::new(topology.num_cities(), self.weight_min, self.weight_max)
    }

    /// Companies for a match, with unset homes drawn from the match seed.
    pub fn companies(&self, topology: &Topology, seed: u64) -> Result<Vec<Company>, TournamentError> {
        let mut rng = stream(seed, streams::FLEET);
        let n = topology.num_cities();
        let mut out = Vec::with_capacity(self.fleets.len());
        for (c, fleet) in self.fleets.iter().enumerate() {
            let vehicles = fleet
                .iter()
                .enumerate()
                .map(|(id, s)| {
                    let drawn = rng.gen_range(0..n);
                    Vehicle {
                        id,
                        home: s.home.unwrap_or(drawn),
                        capacity: s.capacity,
                        cost_per_km: s.cost_per_km,
                    }
                })
                .collect();
            let company = Company::new(c, vehicles)?;
            company.check_cities(n)?;
            out.push(company);
        }
        Ok(out)
    }
}

/// The task sequence of a match.
pub fn match_tasks(distribution: &TaskDistribution, count: usize, seed: u64) -> Vec<Task> {
    let mut rng = stream(seed, streams::TASKS);
    (0..count).map(|i| sample_task(distribution, i as u32, &mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOutcome {
    pub name: String,
    pub company: usize,
    pub tasks_won: usize,
    pub revenue: f64,
    /// `None` when no valid plan was delivered.
    pub cost: Option<f64>,
    pub profit: Option<f64>,
    pub overruns: usize,
    pub forfeit: Option<ForfeitCause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Profit,
    Coin,
    Forfeit,
    DoubleForfeit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchResult {
    pub format_version: u32,
    pub topology: String,
    pub seed: u64,
    pub agents: Vec<AgentOutcome>,
    /// Slot of the winner; `None` only when everybody forfeited.
    pub winner: Option<usize>,
    pub decision: Decision,
}

impl MatchResult {
    pub fn winner_name(&self) -> Option<&str> {
        self.winner.map(|w| self.agents[w].name.as_str())
    }
}

/// Everything a match produced, enough to persist and replay it.
#[derive(Debug, Clone)]
pub struct MatchRun {
    pub result: MatchResult,
    pub tasks: Vec<Task>,
    pub companies: Vec<Company>,
    pub ledger: AuctionLedger,
    pub plans: Vec<Option<Plan>>,
}

fn failure_cause(e: &AgentError) -> ForfeitCause {
    match e {
        AgentError::Timeout(_) => ForfeitCause::Timeout,
        _ => ForfeitCause::Crash,
    }
}

/// Plays one match. Slot i controls company i. Deterministic in `seed`
/// as long as no agent runs into a deadline.
pub fn run_match<A: Agent>(
    agents: &mut [A],
    topology: &Arc<Topology>,
    config: &MatchConfig,
    seed: u64,
) -> Result<MatchRun, TournamentError> {
    config.check()?;
    let companies = config.companies(topology, seed)?;
    if agents.len() != companies.len() {
        return Err(TournamentError::SlotMismatch {
            agents: agents.len(),
            companies: companies.len(),
        });
    }
    let distribution = config.distribution(topology)?;
    let tasks = match_tasks(&distribution, config.tasks, seed);
    let t_plan = Duration::from_millis(config.t_plan_ms);
    let mut ledger = AuctionLedger::new(agents.len());

    for (i, agent) in agents.iter_mut().enumerate() {
        let opponent_vehicles = config
            .reveal_opponent_fleet
            .then(|| companies.iter().filter(|c| c.id != i).map(|c| c.vehicles.len()).max())
            .flatten();
        let ctx = AgentContext {
            agent_id: i,
            topology: topology.clone(),
            distribution,
            company: companies[i].clone(),
            opponent_vehicles,
            t_bid_ms: config.t_bid_ms,
            t_plan_ms: config.t_plan_ms,
            seed: derive_seed(seed, &[streams::AGENT_BASE + i as u64]),
        };
        let started = Instant::now();
        match agent.setup(&ctx) {
            Err(e) => ledger.status[i].forfeit(failure_cause(&e), format!("setup: {e}")),
            Ok(()) if started.elapsed() > t_plan => {
                ledger.status[i].forfeit(ForfeitCause::Timeout, "setup exceeded the planning deadline")
            }
            Ok(()) => {}
        }
    }

    let auction = config.auction();
    let mut tie_rng = stream(seed, streams::TIE_BREAK);
    for task in &tasks {
        run_auction_round(*task, agents, &auction, &mut ledger, &mut tie_rng);
    }

    let mut plans = vec![None; agents.len()];
    for (i, agent) in agents.iter_mut().enumerate() {
        if !ledger.status[i].active() {
            continue;
        }
        let won = ledger.won(i).to_vec();
        let started = Instant::now();
        let reply = agent.final_plan(&won);
        let late = started.elapsed() > t_plan;
        let status = &mut ledger.status[i];
        match reply {
            Err(e) => status.forfeit(failure_cause(&e), format!("final plan: {e}")),
            Ok(_) if late => status.forfeit(ForfeitCause::Timeout, "final plan exceeded the planning deadline"),
            Ok(plan) => match validate_plan(&plan, &won, &companies[i]) {
                Err(e) => status.forfeit(ForfeitCause::InvalidPlan, e.to_string()),
                Ok(v) if !v.is_ok() => status.forfeit(
                    ForfeitCause::InvalidPlan,
                    format!("{} constraint violation(s), first: {:?}", v.violations.len(), v.violations[0]),
                ),
                Ok(_) => plans[i] = Some(plan),
            },
        }
    }

    let outcomes: Vec<AgentOutcome> = agents
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            let revenue = ledger.revenue(i);
            let cost = plans[i].as_ref().map(|p| plan_cost(p, &companies[i], topology.dist()));
            let status = &ledger.status[i];
            AgentOutcome {
                name: agent.name().to_string(),
                company: i,
                tasks_won: ledger.won(i).len(),
                revenue,
                cost,
                profit: cost.map(|c| company_profit(revenue, c)),
                overruns: status.overruns,
                forfeit: status.forfeit,
                detail: status.detail.clone(),
            }
        })
        .collect();

    let (winner, decision) = decide(&outcomes, seed);
    Ok(MatchRun {
        result: MatchResult {
            format_version: RESULT_FORMAT_VERSION,
            topology: topology.name().to_string(),
            seed,
            agents: outcomes,
            winner,
            decision,
        },
        tasks,
        companies,
        ledger,
        plans,
    })
}

/// Highest profit among agents that did not forfeit; exact ties go to a
/// seeded coin.
pub fn decide(outcomes: &[AgentOutcome], seed: u64) -> (Option<usize>, Decision) {
    let standing: Vec<(usize, f64)> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.forfeit.is_none())
        .filter_map(|(i, o)| o.profit.map(|p| (i, p)))
        .collect();
    if standing.is_empty() {
        return (None, Decision::DoubleForfeit);
    }
    let forfeits = standing.len() < outcomes.len();
    let best = standing.iter().map(|&(_, p)| p).fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<usize> = standing.iter().filter(|&&(_, p)| p == best).map(|&(i, _)| i).collect();
    let winner = if top.len() == 1 {
        top[0]
    } else {
        top[stream(seed, streams::MATCH_TIE).gen_range(0..top.len())]
    };
    let decision = match (forfeits, top.len()) {
        (true, _) => Decision::Forfeit,
        (false, 1) => Decision::Profit,
        _ => Decision::Coin,
    };
    (Some(winner), decision)
}

pub type AgentFactory = Arc<dyn Fn() -> Result<Box<dyn Agent + Send>, AgentError> + Send + Sync>;

/// A named way to create fresh agent instances, one per match.
#[derive(Clone)]
pub struct Entrant {
    pub name: String,
    pub factory: AgentFactory,
}

impl std::fmt::Debug for Entrant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Entrant").field("name", &self.name).finish()
    }
}

impl Entrant {
    pub fn new<F>(name: impl Into<String>, factory: F) -> Self
    where
        F: Fn() -> Result<Box<dyn Agent + Send>, AgentError> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            factory: Arc::new(factory),
        }
    }

    pub fn builtin(name: &str, tuning: AgentTuning) -> Option<Self> {
        let canonical = crate::agents::canonical_name(name)?;
        builtin_with(canonical, tuning)?;
        Some(Self::new(canonical, move || {
            Ok(builtin_with(canonical, tuning).expect("checked above"))
        }))
    }

    /// A fresh instance reporting the roster name.
    pub fn spawn(&self) -> Box<dyn Agent + Send> {
        match (self.factory)() {
            Ok(a) => Box::new(Named(self.name.clone(), a)),
            Err(e) => Box::new(Unstartable(self.name.clone(), e.to_string())),
        }
    }
}

/// Reports the roster name rather than whatever the agent calls itself.
struct Named(String, Box<dyn Agent + Send>);

impl Agent for Named {
    fn name(&self) -> &str {
        &self.0
    }
    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.1.setup(ctx)
    }
    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        self.1.ask_bid(task)
    }
    fn observe(&mut self, observation: &AuctionObservation) -> Result<(), AgentError> {
        self.1.observe(observation)
    }
    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        self.1.final_plan(won)
    }
}

/// Stands in for an agent whose factory failed; crashes at setup.
struct Unstartable(String, String);

impl Agent for Unstartable {
    fn name(&self) -> &str {
        &self.0
    }
    fn setup(&mut self, _: &AgentContext) -> Result<(), AgentError> {
        Err(AgentError::Crashed(format!("could not start: {}", self.1)))
    }
    fn ask_bid(&mut self, _: &Task) -> Result<BidResponse, AgentError> {
        Err(AgentError::Crashed(self.1.clone()))
    }
    fn observe(&mut self, _: &AuctionObservation) -> Result<(), AgentError> {
        Ok(())
    }
    fn final_plan(&mut self, _: &[Task]) -> Result<Plan, AgentError> {
        Err(AgentError::Crashed(self.1.clone()))
    }
}

/// Plays `a` against `b` twice on the same seed: first `a` controls company
/// 0, then the roles are swapped.
pub fn run_pair(
    a: &Entrant,
    b: &Entrant,
    topology: &Arc<Topology>,
    config: &MatchConfig,
    seed: u64,
) -> Result<[MatchRun; 2], TournamentError> {
    let first = run_match(&mut [a.spawn(), b.spawn()], topology, config, seed)?;
    let second = run_match(&mut [b.spawn(), a.spawn()], topology, config, seed)?;
    Ok([first, second])
}

/// One scheduled match of a tournament.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub pair: usize,
    /// 0 for the first match of the pair, 1 for the swapped one.
    pub swap: usize,
    /// Roster index per slot.
    pub slots: [usize; 2],
}

/// Every unordered pair twice, companies swapped the second time.
pub fn schedule(n: usize) -> Vec<Fixture> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    let mut pair = 0;
    for i in 0..n {
        for j in i + 1..n {
            out.push(Fixture { pair, swap: 0, slots: [i, j] });
            out.push(Fixture { pair, swap: 1, slots: [j, i] });
            pair += 1;
        }
    }
    out
}

/// Seed shared by both matches of a pair, so the swap only changes who holds
/// which company.
pub fn pair_seed(master: u64, tournament: usize, pair: usize) -> u64 {
    derive_seed(master, &[tournament as u64, pair as u64])
}

#[derive(Debug, Clone)]
pub struct PlayedMatch {
    pub tournament: usize,
    pub fixture: Fixture,
    pub run: MatchRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentTable {
    pub tournament: usize,
    pub topology: String,
    pub agents: Vec<String>,
    pub wins: Vec<usize>,
    pub losses: Vec<usize>,
}

impl TournamentTable {
    pub fn matches_played(&self, agent: usize) -> usize {
        self.wins[agent] + self.losses[agent]
    }

    pub fn win_rate(&self, agent: usize) -> f64 {
        let played = self.matches_played(agent);
        if played == 0 {
            0.0
        } else {
            self.wins[agent] as f64 / played as f64
        }
    }
}

/// Wins and losses per roster entry; a double forfeit is a loss for both.
pub fn tabulate(tournament: usize, topology: &str, roster: &[String], matches: &[PlayedMatch]) -> TournamentTable {
    let mut table = TournamentTable {
        tournament,
        topology: topology.to_string(),
        agents: roster.to_vec(),
        wins: vec![0; roster.len()],
        losses: vec![0; roster.len()],
    };
    for m in matches {
        for (slot, &agent) in m.fixture.slots.iter().enumerate() {
            if m.run.result.winner == Some(slot) {
                table.wins[agent] += 1;
            } else {
                table.losses[agent] += 1;
            }
        }
    }
    table
}

#[derive(Debug, Clone)]
pub struct TournamentRun {
    pub table: TournamentTable,
    pub matches: Vec<PlayedMatch>,
}

/// Double all-play-all on one topology. Matches run in parallel; results are
/// returned in schedule order.
pub fn run_tournament(
    entrants: &[Entrant],
    topology: &Arc<Topology>,
    config: &MatchConfig,
    master_seed: u64,
    tournament: usize,
) -> Result<TournamentRun, TournamentError> {
    if entrants.len() < 2 {
        return Err(TournamentError::TooFewAgents(entrants.len()));
    }
    config.check()?;
    let fixtures = schedule(entrants.len());
    let matches = fixtures
        .par_iter()
        .map(|f| {
            let mut agents = [entrants[f.slots[0]].spawn(), entrants[f.slots[1]].spawn()];
            let seed = pair_seed(master_seed, tournament, f.pair);
            run_match(&mut agents, topology, config, seed).map(|run| PlayedMatch {
                tournament,
                fixture: *f,
                run,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let roster: Vec<String> = entrants.iter().map(|e| e.name.clone()).collect();
    Ok(TournamentRun {
        table: tabulate(tournament, topology.name(), &roster, &matches),
        matches,
    })
}

/// `per_topology` tournaments on each topology, numbered topology-major.
pub fn run_series(
    entrants: &[Entrant],
    topologies: &[Arc<Topology>],
    per_topology: usize,
    config: &MatchConfig,
    master_seed: u64,
) -> Result<Vec<TournamentRun>, TournamentError> {
    let mut out = Vec::with_capacity(topologies.len() * per_topology);
    for (k, topology) in topologies.iter().enumerate() {
        for s in 0..per_topology {
            out.push(run_tournament(entrants, topology, config, master_seed, k * per_topology + s)?);
        }
    }
    Ok(out)
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    #[serde(rename = "Agent")]
    pub agent: String,
    #[serde(rename = "Avg #Wins / Tour")]
    pub avg_wins: f64,
    #[serde(rename = "SD #Wins / Tour")]
    pub sd_wins: f64,
    #[serde(rename = "Avg #Losses / Tour")]
    pub avg_losses: f64,
    #[serde(rename = "SD #Losses / Tour")]
    pub sd_losses: f64,
    #[serde(rename = "Total Wins")]
    pub total_wins: usize,
    #[serde(rename = "Total Losses")]
    pub total_losses: usize,
    #[serde(rename = "Winrate")]
    pub winrate: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-agent statistics over tournaments (population standard deviation),
/// sorted by win rate, best first; equal rates are ordered by name.
pub fn aggregate(tables: &[TournamentTable]) -> Vec<AgentRow> {
    let mut names: Vec<String> = Vec::new();
    for t in tables {
        for a in &t.agents {
            if !names.contains(a) {
                names.push(a.clone());
            }
        }
    }
    let mut rows: Vec<AgentRow> = names
        .into_iter()
        .map(|name| {
            let mut wins = Vec::new();
            let mut losses = Vec::new();
            for t in tables {
                if let Some(i) = t.agents.iter().position(|a| *a == name) {
                    wins.push(t.wins[i] as f64);
                    losses.push(t.losses[i] as f64);
                }
            }
            let (avg_wins, sd_wins) = mean_sd(&wins);
            let (avg_losses, sd_losses) = mean_sd(&losses);
            let total_wins = wins.iter().sum::<f64>() as usize;
            let total_losses = losses.iter().sum::<f64>() as usize;
            let played = total_wins + total_losses;
            AgentRow {
                agent: name,
                avg_wins,
                sd_wins,
                avg_losses,
                sd_losses,
                total_wins,
                total_losses,
                winrate: if played == 0 { 0.0 } else { total_wins as f64 / played as f64 },
            }
        })
        .collect();
    rows.sort_by(|a, b| b.winrate.total_cmp(&a.winrate).then_with(|| a.agent.cmp(&b.agent)));
    rows
}

/// Writes the table as CSV, four decimals for the real-valued columns.
pub fn write_csv<W: Write>(rows: &[AgentRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "Agent",
        "Avg #Wins / Tour",
        "SD #Wins / Tour",
        "Avg #Losses / Tour",
        "SD #Losses / Tour",
        "Total Wins",
        "Total Losses",
        "Winrate",
    ])?;
    for r in rows {
        w.write_record([
            r.agent.clone(),
            format!("{:.4}", r.avg_wins),
            format!("{:.4}", r.sd_wins),
            format!("{:.4}", r.avg_losses),
            format!("{:.4}", r.sd_losses),
            r.total_wins.to_string(),
            r.total_losses.to_string(),
            format!("{:.4}", r.winrate),
        ])?;
    }
    w.flush()?;
    Ok(())
}
