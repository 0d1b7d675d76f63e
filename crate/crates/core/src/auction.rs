//! Sequential reverse first-price sealed-bid auctions.
//!
//! Bids are collected one agent at a time in slot order; nobody sees the
//! round's other bids until the winner is fixed, because the only thing an
//! agent receives before bidding is the task itself.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentError, AuctionObservation, BidRecord, BidResponse};
use crate::model::{Task, TaskId};

pub const ROUND_FORMAT_VERSION: u32 = 1;

/// Default number of bid overruns tolerated before an agent forfeits.
pub const DEFAULT_MAX_OVERRUNS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForfeitCause {
    Crash,
    Timeout,
    InvalidPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionConfig {
    pub t_bid_ms: u64,
    /// Overruns beyond this count forfeit the match.
    pub max_overruns: usize,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self {
            t_bid_ms: 5_000,
            max_overruns: DEFAULT_MAX_OVERRUNS,
        }
    }
}

/// Per-agent health as seen by the engine.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentStatus {
    pub overruns: usize,
    pub invalid_bids: usize,
    pub forfeit: Option<ForfeitCause>,
    pub detail: Option<String>,
}

impl AgentStatus {
    /// Forfeited agents are no longer asked anything and always abstain.
    pub fn active(&self) -> bool {
        self.forfeit.is_none()
    }

    pub fn forfeit(&mut self, cause: ForfeitCause, detail: impl Into<String>) {
        if self.forfeit.is_none() {
            self.forfeit = Some(cause);
            self.detail = Some(detail.into());
        }
    }
}

/// One line of the auction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    #[serde(default = "round_version")]
    pub format_version: u32,
    pub observation: AuctionObservation,
    /// Agents whose bid arrived after the deadline.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overran: Vec<usize>,
    /// Agents whose bid was negative or not finite.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invalid: Vec<usize>,
    /// Agents that crashed or forfeited during this round.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tie_break: bool,
}

fn round_version() -> u32 {
    ROUND_FORMAT_VERSION
}

/// Bids, winners and prices of a whole auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionLedger {
    pub rounds: Vec<RoundRecord>,
    pub status: Vec<AgentStatus>,
    revenue: Vec<f64>,
    won: Vec<Vec<Task>>,
}

impl AuctionLedger {
    pub fn new(agents: usize) -> Self {
        Self {
            rounds: Vec::new(),
            status: vec![AgentStatus::default(); agents],
            revenue: vec![0.0; agents],
            won: vec![Vec::new(); agents],
        }
    }

    /// Rebuilds a ledger from logged rounds, recomputing revenue and won sets.
    pub fn from_rounds(agents: usize, rounds: Vec<RoundRecord>, status: Vec<AgentStatus>) -> Self {
        let mut ledger = Self::new(agents);
        ledger.status = status;
        for r in rounds {
            ledger.record(r);
        }
        ledger
    }

    fn record(&mut self, r: RoundRecord) {
        if let (Some(w), Some(_)) = (r.observation.winner, r.observation.price) {
            self.won[w].push(r.observation.task);
            let total = revenue_of(&self.rounds_with(&r), w);
            self.revenue[w] = total;
        }
        self.rounds.push(r);
    }

    fn rounds_with<'a>(&'a self, extra: &'a RoundRecord) -> Vec<&'a AuctionObservation> {
        self.rounds.iter().map(|r| &r.observation).chain(std::iter::once(&extra.observation)).collect()
    }

    pub fn num_agents(&self) -> usize {
        self.status.len()
    }

    pub fn observations(&self) -> impl Iterator<Item = &AuctionObservation> {
        self.rounds.iter().map(|r| &r.observation)
    }

    /// Sum of winning prices, added in task-id order.
    pub fn revenue(&self, agent: usize) -> f64 {
        self.revenue[agent]
    }

    pub fn won(&self, agent: usize) -> &[Task] {
        &self.won[agent]
    }

    pub fn won_ids(&self, agent: usize) -> Vec<TaskId> {
        self.won[agent].iter().map(|t| t.id).collect()
    }
}

/// Revenue of `agent` over `observations`, accumulated in task-id order so the
/// float result never depends on how the rounds were stored.
pub fn revenue_of<'a, I>(observations: I, agent: usize) -> f64
where
    I: IntoIterator<Item = &'a &'a AuctionObservation>,
{
    let mut prices: Vec<(TaskId, f64)> = observations
        .into_iter()
        .filter(|o| o.winner == Some(agent))
        .filter_map(|o| o.price.map(|p| (o.task.id, p)))
        .collect();
    prices.sort_by_key(|&(id, _)| id);
    prices.iter().fold(0.0, |acc, &(_, p)| acc + p)
}

fn is_timeout(e: &AgentError) -> bool {
    matches!(e, AgentError::Timeout(_))
}

/// Lowest bid wins; exact ties are settled uniformly at random by `rng`.
/// Returns the winner and whether a tie-break was needed.
pub fn select_winner<R: Rng + ?Sized>(bids: &[BidRecord], rng: &mut R) -> (Option<usize>, bool) {
    let min = bids
        .iter()
        .filter_map(|b| b.bid)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return (None, false);
    }
    let lowest: Vec<usize> = bids.iter().filter(|b| b.bid == Some(min)).map(|b| b.agent).collect();
    if lowest.len() == 1 {
        (Some(lowest[0]), false)
    } else {
        (Some(lowest[rng.gen_range(0..lowest.len())]), true)
    }
}

/// Auctions one task, appends the round to the ledger and informs every
/// agent that is still in the match.
pub fn run_auction_round<A, R>(
    task: Task,
    agents: &mut [A],
    config: &AuctionConfig,
    ledger: &mut AuctionLedger,
    rng: &mut R,
) -> AuctionObservation
where
    A: Agent,
    R: Rng + ?Sized,
{
    let limit = Duration::from_millis(config.t_bid_ms);
    let mut record = RoundRecord {
        format_version: ROUND_FORMAT_VERSION,
        observation: AuctionObservation {
            round: ledger.rounds.len(),
            task,
            bids: Vec::with_capacity(agents.len()),
            winner: None,
            price: None,
        },
        overran: vec![],
        invalid: vec![],
        failed: vec![],
        tie_break: false,
    };

    for (i, agent) in agents.iter_mut().enumerate() {
        let status = &mut ledger.status[i];
        let mut bid = None;
        if status.active() {
            let started = Instant::now();
            let reply = agent.ask_bid(&task);
            let late = started.elapsed() > limit;
            match reply {
                Err(e) if is_timeout(&e) => overrun(status, config, &mut record, i),
                Err(e) => {
                    status.forfeit(ForfeitCause::Crash, format!("round {}: {e}", record.observation.round));
                    record.failed.push(i);
                }
                Ok(_) if late => overrun(status, config, &mut record, i),
                Ok(BidResponse::Abstain) => {}
                Ok(BidResponse::Bid(v)) if v.is_finite() && v >= 0.0 => bid = Some(v),
                Ok(BidResponse::Bid(_)) => {
                    status.invalid_bids += 1;
                    record.invalid.push(i);
                }
            }
        }
        record.observation.bids.push(BidRecord { agent: i, bid });
    }

    let (winner, tie) = select_winner(&record.observation.bids, rng);
    record.observation.winner = winner;
    record.observation.price = winner.and_then(|w| record.observation.bids[w].bid);
    record.tie_break = tie;

    let observation = record.observation.clone();
    for (i, agent) in agents.iter_mut().enumerate() {
        if !ledger.status[i].active() {
            continue;
        }
        if let Err(e) = agent.observe(&observation) {
            if !is_timeout(&e) {
                ledger.status[i].forfeit(ForfeitCause::Crash, format!("round {}: {e}", observation.round));
                record.failed.push(i);
            }
        }
    }
    ledger.record(record);
    observation
}

fn overrun(status: &mut AgentStatus, config: &AuctionConfig, record: &mut RoundRecord, agent: usize) {
    status.overruns += 1;
    record.overran.push(agent);
    if status.overruns > config.max_overruns {
        status.forfeit(
            ForfeitCause::Timeout,
            format!("{} bid overruns (limit {})", status.overruns, config.max_overruns),
        );
        record.failed.push(agent);
    }
}

/// Auctions `tasks` in order. The agents only ever learn the task count by
/// counting rounds as they happen.
pub fn run_auction<A, R, I>(tasks: I, agents: &mut [A], config: &AuctionConfig, rng: &mut R) -> AuctionLedger
where
    A: Agent,
    R: Rng + ?Sized,
    I: IntoIterator<Item = Task>,
{
    let mut ledger = AuctionLedger::new(agents.len());
    for task in tasks {
        run_auction_round(task, agents, config, &mut ledger, rng);
    }
    ledger
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentContext;
    use crate::model::Plan;
    use crate::rng::stream;

    struct Fixed(Vec<BidResponse>, usize);

    impl Agent for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn setup(&mut self, _: &AgentContext) -> Result<(), AgentError> {
            Ok(())
        }
        fn ask_bid(&mut self, _: &Task) -> Result<BidResponse, AgentError> {
            let b = self.0[self.1 % self.0.len()];
            self.1 += 1;
            Ok(b)
        }
        fn observe(&mut self, _: &AuctionObservation) -> Result<(), AgentError> {
            Ok(())
        }
        fn final_plan(&mut self, _: &[Task]) -> Result<Plan, AgentError> {
            Ok(Plan::empty(1))
        }
    }

    fn task(id: u32) -> Task {
        Task::new(id, 0, 1, 5.0).unwrap()
    }

    #[test]
    fn lowest_bid_wins_at_own_price() {
        let mut agents = [Fixed(vec![BidResponse::Bid(10.0)], 0), Fixed(vec![BidResponse::Bid(12.0)], 0)];
        let l = run_auction([task(0)], &mut agents, &AuctionConfig::default(), &mut stream(1, 1));
        assert_eq!(l.rounds[0].observation.winner, Some(0));
        assert_eq!(l.rounds[0].observation.price, Some(10.0));
        assert_eq!(l.revenue(0), 10.0);
    }

    #[test]
    fn sole_bidder_wins() {
        let mut agents = [Fixed(vec![BidResponse::Abstain], 0), Fixed(vec![BidResponse::Bid(99.0)], 0)];
        let l = run_auction([task(0)], &mut agents, &AuctionConfig::default(), &mut stream(1, 1));
        assert_eq!(l.rounds[0].observation.winner, Some(1));
        assert_eq!(l.revenue(1), 99.0);
    }

    #[test]
    fn all_abstain_discards_task() {
        let mut agents = [Fixed(vec![BidResponse::Abstain], 0), Fixed(vec![BidResponse::Abstain], 0)];
        let l = run_auction([task(0), task(1)], &mut agents, &AuctionConfig::default(), &mut stream(1, 1));
        assert!(l.observations().all(|o| o.winner.is_none() && o.price.is_none()));
        assert!(l.won(0).is_empty() && l.won(1).is_empty());
    }

    #[test]
    fn invalid_bids_become_abstentions() {
        let mut agents = [
            Fixed(vec![BidResponse::Bid(-1.0), BidResponse::Bid(f64::NAN)], 0),
            Fixed(vec![BidResponse::Bid(3.0)], 0),
        ];
        let l = run_auction([task(0), task(1)], &mut agents, &AuctionConfig::default(), &mut stream(1, 1));
        assert_eq!(l.status[0].invalid_bids, 2);
        assert!(l.observations().all(|o| o.winner == Some(1) && o.bid_of(0).is_none()));
    }

    #[test]
    fn ties_use_the_coin() {
        let mut zero = 0;
        for seed in 0..2000 {
            let (w, tie) = select_winner(
                &[BidRecord { agent: 0, bid: Some(10.0) }, BidRecord { agent: 1, bid: Some(10.0) }],
                &mut stream(seed, 1),
            );
            assert!(tie);
            zero += (w == Some(0)) as usize;
        }
        assert!((900..1100).contains(&zero), "{zero}");
    }

    #[test]
    fn round_record_round_trips() {
        let mut agents = [Fixed(vec![BidResponse::Bid(0.1 + 0.2)], 0), Fixed(vec![BidResponse::Abstain], 0)];
        let l = run_auction([task(4)], &mut agents, &AuctionConfig::default(), &mut stream(1, 1));
        let line = serde_json::to_string(&l.rounds[0]).unwrap();
        let back: RoundRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, l.rounds[0]);
        assert_eq!(AuctionLedger::from_rounds(2, vec![back], l.status.clone()), l);
    }
}
