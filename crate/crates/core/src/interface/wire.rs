//! Line-delimited JSON protocol for out-of-process agents.
//!
//! ```text
//! harness -> agent                      agent -> harness
//! {"type":"setup", ...}                 {"type":"ready"}
//! {"type":"ask_bid","task":{..}}        {"type":"bid","value":12.5} | {"type":"abstain"}
//! {"type":"result","observation":{..}}  (no reply)
//! {"type":"final_plan","won":[..]}      {"type":"plan","plan":{..}}
//! ```
//!
//! Every message carries `format_version`. An agent may answer any request
//! with `{"type":"error","message":..}`, which counts as a crash.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentContext, AgentError, AuctionObservation, BidResponse};
use crate::model::{Company, Plan, PlanDoc, Task, TaskDistribution};
use crate::topology::{Topology, TopologyDoc, TopologyError};

pub const WIRE_FORMAT_VERSION: u32 = 1;

fn version() -> u32 {
    WIRE_FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HarnessMessage {
    Setup {
        #[serde(default = "version")]
        format_version: u32,
        agent_id: usize,
        topology: TopologyDoc,
        distribution: TaskDistribution,
        company: Company,
        opponent_vehicles: Option<usize>,
        t_bid_ms: u64,
        t_plan_ms: u64,
        seed: u64,
    },
    AskBid {
        #[serde(default = "version")]
        format_version: u32,
        task: Task,
    },
    Result {
        #[serde(default = "version")]
        format_version: u32,
        observation: AuctionObservation,
    },
    FinalPlan {
        #[serde(default = "version")]
        format_version: u32,
        won: Vec<Task>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentMessage {
    Ready {
        #[serde(default = "version")]
        format_version: u32,
    },
    Bid {
        #[serde(default = "version")]
        format_version: u32,
        value: f64,
    },
    Abstain {
        #[serde(default = "version")]
        format_version: u32,
    },
    Plan {
        #[serde(default = "version")]
        format_version: u32,
        plan: PlanDoc,
    },
    Error {
        #[serde(default = "version")]
        format_version: u32,
        message: String,
    },
}

impl AgentMessage {
    fn version(&self) -> u32 {
        match self {
            AgentMessage::Ready { format_version }
            | AgentMessage::Bid { format_version, .. }
            | AgentMessage::Abstain { format_version }
            | AgentMessage::Plan { format_version, .. }
            | AgentMessage::Error { format_version, .. } => *format_version,
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported format_version {0}")]
    UnsupportedVersion(u32),
    #[error("bad topology in setup: {0}")]
    Topology(#[from] TopologyError),
    #[error("{0} before setup")]
    NotSetUp(&'static str),
}

/// Adapter that runs an agent as a child process speaking the protocol on
/// its standard streams.
pub struct ExternalAgent {
    name: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    /// Replies still owed for requests that already timed out.
    stale: usize,
    t_bid_ms: u64,
    t_plan_ms: u64,
}

impl ExternalAgent {
    pub fn spawn(name: &str, command: &[String]) -> Result<Self, AgentError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| AgentError::Protocol("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        Ok(Self {
            name: name.to_string(),
            child,
            stdin,
            lines: rx,
            stale: 0,
            t_bid_ms: 5_000,
            t_plan_ms: 30_000,
        })
    }

    fn send(&mut self, msg: &HarnessMessage) -> Result<(), AgentError> {
        let line = serde_json::to_string(msg).map_err(|e| AgentError::Protocol(e.to_string()))?;
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| AgentError::Exited(e.to_string()))
    }

    /// Sends `msg` and waits up to `timeout_ms` for the reply, skipping the
    /// late answers to earlier requests.
    fn request(&mut self, msg: &HarnessMessage, timeout_ms: u64) -> Result<AgentMessage, AgentError> {
        self.send(msg)?;
        let deadline = Instant::now() + Duration::from_millis(timeout_ms);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(_)) if self.stale > 0 => self.stale -= 1,
                Ok(Ok(line)) => {
                    let reply: AgentMessage =
                        serde_json::from_str(&line).map_err(|e| AgentError::Protocol(format!("{e}: {line}")))?;
                    if reply.version() != WIRE_FORMAT_VERSION {
                        return Err(AgentError::Protocol(format!("format_version {}", reply.version())));
                    }
                    if let AgentMessage::Error { message, .. } = reply {
                        return Err(AgentError::Crashed(message));
                    }
                    return Ok(reply);
                }
                Ok(Err(e)) => return Err(AgentError::Exited(e.to_string())),
                Err(RecvTimeoutError::Timeout) => {
                    self.stale += 1;
                    return Err(AgentError::Timeout(timeout_ms));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let status = self.child.try_wait().ok().flatten();
                    return Err(AgentError::Exited(match status {
                        Some(s) => s.to_string(),
                        None => "closed its output".into(),
                    }));
                }
            }
        }
    }
}

impl Drop for ExternalAgent {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn unexpected(reply: AgentMessage, wanted: &str) -> AgentError {
    AgentError::Protocol(format!("expected {wanted}, got {reply:?}"))
}

impl Agent for ExternalAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.t_bid_ms = ctx.t_bid_ms;
        self.t_plan_ms = ctx.t_plan_ms;
        let msg = HarnessMessage::Setup {
            format_version: WIRE_FORMAT_VERSION,
            agent_id: ctx.agent_id,
            topology: ctx.topology.to_doc(),
            distribution: ctx.distribution,
            company: ctx.company.clone(),
            opponent_vehicles: ctx.opponent_vehicles,
            t_bid_ms: ctx.t_bid_ms,
            t_plan_ms: ctx.t_plan_ms,
            seed: ctx.seed,
        };
        match self.request(&msg, ctx.t_plan_ms)? {
            AgentMessage::Ready { .. } => Ok(()),
            other => Err(unexpected(other, "ready")),
        }
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let msg = HarnessMessage::AskBid {
            format_version: WIRE_FORMAT_VERSION,
            task: *task,
        };
        match self.request(&msg, self.t_bid_ms)? {
            AgentMessage::Bid { value, .. } => Ok(BidResponse::Bid(value)),
            AgentMessage::Abstain { .. } => Ok(BidResponse::Abstain),
            other => Err(unexpected(other, "bid or abstain")),
        }
    }

    fn observe(&mut self, observation: &AuctionObservation) -> Result<(), AgentError> {
        self.send(&HarnessMessage::Result {
            format_version: WIRE_FORMAT_VERSION,
            observation: observation.clone(),
        })
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let msg = HarnessMessage::FinalPlan {
            format_version: WIRE_FORMAT_VERSION,
            won: won.to_vec(),
        };
        match self.request(&msg, self.t_plan_ms)? {
            AgentMessage::Plan { plan, .. } => plan.resolve(won).map_err(|e| AgentError::Protocol(e.to_string())),
            other => Err(unexpected(other, "plan")),
        }
    }
}

/// Test hooks for the serving side.
#[derive(Debug, Clone, Copy, Default)]
pub struct ServeOptions {
    /// Sleep this long before answering each bid request.
    pub bid_delay: Duration,
}

fn reply<W: Write>(out: &mut W, msg: &AgentMessage) -> Result<(), WireError> {
    writeln!(out, "{}", serde_json::to_string(msg)?)?;
    out.flush()?;
    Ok(())
}

fn failure(e: impl std::fmt::Display) -> AgentMessage {
    AgentMessage::Error {
        format_version: WIRE_FORMAT_VERSION,
        message: e.to_string(),
    }
}

/// Runs `agent` behind the protocol until `input` ends.
pub fn serve<A, R, W>(agent: &mut A, input: R, mut output: W, options: ServeOptions) -> Result<(), WireError>
where
    A: Agent,
    R: BufRead,
    W: Write,
{
    let v = WIRE_FORMAT_VERSION;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: HarnessMessage = serde_json::from_str(&line)?;
        match msg {
            HarnessMessage::Setup {
                format_version,
                agent_id,
                topology,
                distribution,
                company,
                opponent_vehicles,
                t_bid_ms,
                t_plan_ms,
                seed,
            } => {
                if format_version != v {
                    return Err(WireError::UnsupportedVersion(format_version));
                }
                let ctx = AgentContext {
                    agent_id,
                    topology: Arc::new(Topology::from_doc(topology)?),
                    distribution,
                    company,
                    opponent_vehicles,
                    t_bid_ms,
                    t_plan_ms,
                    seed,
                };
                let r = match agent.setup(&ctx) {
                    Ok(()) => AgentMessage::Ready { format_version: v },
                    Err(e) => failure(e),
                };
                reply(&mut output, &r)?;
            }
            HarnessMessage::AskBid { task, .. } => {
                std::thread::sleep(options.bid_delay);
                let r = match agent.ask_bid(&task) {
                    Ok(BidResponse::Bid(value)) => AgentMessage::Bid { format_version: v, value },
                    Ok(BidResponse::Abstain) => AgentMessage::Abstain { format_version: v },
                    Err(e) => failure(e),
                };
                reply(&mut output, &r)?;
            }
            HarnessMessage::Result { observation, .. } => {
                // no reply channel; a failure here surfaces on the next request
                if let Err(e) = agent.observe(&observation) {
                    eprintln!("observe failed: {e}");
                }
            }
            HarnessMessage::FinalPlan { won, .. } => {
                let r = match agent.final_plan(&won) {
                    Ok(plan) => AgentMessage::Plan {
                        format_version: v,
                        plan: plan.to_doc(),
                    },
                    Err(e) => failure(e),
                };
                reply(&mut output, &r)?;
            }
        }
    }
    Ok(())
}
