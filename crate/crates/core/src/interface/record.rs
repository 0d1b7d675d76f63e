//! Self-contained match records and their replay.
//!
//! A record embeds the topology document, the match configuration, the task
//! sequence, every auction round, the delivered plans and the result. Replay
//! first audits the record against itself (revenue from the rounds, costs
//! from the plans) and then plays the match again from the seed.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{AgentSpec, ConfigError};
use crate::auction::{AuctionLedger, RoundRecord};
use crate::model::{company_profit, plan_cost, validate_plan, Company, ModelError, PlanDoc, Task};
use crate::topology::{Topology, TopologyDoc, TopologyError};
use crate::tournament::{decide, match_tasks, run_match, Fixture, MatchConfig, MatchResult, MatchRun, TournamentError};

pub const RECORD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported record format_version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Match(#[from] TournamentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRecord {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tournament: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<Fixture>,
    pub seed: u64,
    pub topology: TopologyDoc,
    pub config: MatchConfig,
    /// How to recreate each slot's agent.
    pub agents: Vec<AgentSpec>,
    pub companies: Vec<Company>,
    pub tasks: Vec<Task>,
    pub rounds: Vec<RoundRecord>,
    pub plans: Vec<Option<PlanDoc>>,
    pub result: MatchResult,
}

impl MatchRecord {
    pub fn from_run(
        run: &MatchRun,
        topology: &Topology,
        config: &MatchConfig,
        agents: Vec<AgentSpec>,
        tournament: Option<usize>,
        fixture: Option<Fixture>,
    ) -> Self {
        Self {
            format_version: RECORD_FORMAT_VERSION,
            tournament,
            fixture,
            seed: run.result.seed,
            topology: topology.to_doc(),
            config: config.clone(),
            agents,
            companies: run.companies.clone(),
            tasks: run.tasks.clone(),
            rounds: run.ledger.rounds.clone(),
            plans: run.plans.iter().map(|p| p.as_ref().map(|p| p.to_doc())).collect(),
            result: run.result.clone(),
        }
    }

    pub fn to_line(&self) -> Result<String, RecordError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, RecordError> {
        let r: MatchRecord = serde_json::from_str(json)?;
        if r.format_version != RECORD_FORMAT_VERSION {
            return Err(RecordError::UnsupportedVersion(r.format_version));
        }
        Ok(r)
    }

    /// Reads every record of a line-delimited file.
    pub fn read_all<R: BufRead>(input: R) -> Result<Vec<Self>, RecordError> {
        let mut out = Vec::new();
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(Self::from_json(&line)?);
            }
        }
        Ok(out)
    }

    pub fn write_line<W: Write>(&self, mut out: W) -> Result<(), RecordError> {
        writeln!(out, "{}", self.to_line()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    /// Differences between the stored result and what the record itself
    /// implies (ledger revenue, plan validity and cost).
    pub audit: Vec<String>,
    /// Differences between the record and a fresh run from the same seed.
    pub rerun: Vec<String>,
}

impl ReplayReport {
    pub fn is_ok(&self) -> bool {
        self.audit.is_empty() && self.rerun.is_empty()
    }
}

fn same<T: PartialEq + std::fmt::Debug>(what: &str, stored: &T, derived: &T, out: &mut Vec<String>) {
    if stored != derived {
        out.push(format!("{what}: recorded {stored:?}, derived {derived:?}"));
    }
}

/// Recomputes revenue, costs, profits and the winner from the record alone.
pub fn audit(record: &MatchRecord) -> Result<Vec<String>, RecordError> {
    let mut out = Vec::new();
    let topology = Topology::from_doc(record.topology.clone())?;
    let n = record.result.agents.len();
    let distribution = record.config.distribution(&topology)?;
    same("tasks", &record.tasks, &match_tasks(&distribution, record.config.tasks, record.seed), &mut out);
    same(
        "companies",
        &record.companies,
        &record.config.companies(&topology, record.seed)?,
        &mut out,
    );
    let ledger = AuctionLedger::from_rounds(n, record.rounds.clone(), vec![Default::default(); n]);
    let mut outcomes = record.result.agents.clone();
    for (i, o) in outcomes.iter_mut().enumerate() {
        o.revenue = ledger.revenue(i);
        o.tasks_won = ledger.won(i).len();
        o.cost = None;
        o.profit = None;
        if let Some(doc) = &record.plans[i] {
            let won = ledger.won(i);
            let plan = doc.resolve(won)?;
            if !validate_plan(&plan, won, &record.companies[i])?.is_ok() {
                out.push(format!("slot {i}: recorded plan is invalid"));
            }
            let cost = plan_cost(&plan, &record.companies[i], topology.dist());
            o.cost = Some(cost);
            o.profit = Some(company_profit(o.revenue, cost));
        }
    }
    for (i, (stored, derived)) in record.result.agents.iter().zip(&outcomes).enumerate() {
        same(&format!("slot {i} outcome"), stored, derived, &mut out);
    }
    let (winner, decision) = decide(&record.result.agents, record.seed);
    same("winner", &record.result.winner, &winner, &mut out);
    same("decision", &record.result.decision, &decision, &mut out);
    Ok(out)
}

/// Audits the record, then plays the match again and compares rounds,
/// plans and result exactly.
pub fn replay(record: &MatchRecord) -> Result<ReplayReport, RecordError> {
    let audit = audit(record)?;
    let topology = Arc::new(Topology::from_doc(record.topology.clone())?);
    let mut agents = record
        .agents
        .iter()
        .map(|a| a.entrant(record.config.tuning).map(|e| e.spawn()))
        .collect::<Result<Vec<_>, _>>()?;
    let run = run_match(&mut agents, &topology, &record.config, record.seed)?;
    let fresh = MatchRecord::from_run(
        &run,
        &topology,
        &record.config,
        record.agents.clone(),
        record.tournament,
        record.fixture,
    );
    let mut rerun = Vec::new();
    same("tasks", &record.tasks, &fresh.tasks, &mut rerun);
    for (i, (a, b)) in record.rounds.iter().zip(&fresh.rounds).enumerate() {
        same(&format!("round {i}"), a, b, &mut rerun);
    }
    same("round count", &record.rounds.len(), &fresh.rounds.len(), &mut rerun);
    same("plans", &record.plans, &fresh.plans, &mut rerun);
    same("result", &record.result, &fresh.result, &mut rerun);
    Ok(ReplayReport { audit, rerun })
}
