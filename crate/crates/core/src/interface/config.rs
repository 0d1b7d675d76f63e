//! The run configuration document.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wire::ExternalAgent;
use crate::agents::{canonical_name, AgentTuning};
use crate::auction::DEFAULT_MAX_OVERRUNS;
use crate::model::DEFAULT_WEIGHT_RANGE;
use crate::topology::{Topology, TopologyError, BUNDLED_TOPOLOGIES};
use crate::tournament::{default_fleets, Entrant, MatchConfig, TournamentError, VehicleSpec};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported configuration format_version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("duplicate agent name {0:?}")]
    DuplicateAgent(String),
    #[error("external agent {0:?} has an empty command")]
    EmptyCommand(String),
    #[error("topology {name:?}: {source}")]
    Topology { name: String, source: TopologyError },
    #[error(transparent)]
    Match(#[from] TournamentError),
}

/// A roster entry: a built-in agent name or an external command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentSpec {
    Builtin(String),
    External { name: String, command: Vec<String> },
}

impl AgentSpec {
    pub fn name(&self) -> &str {
        match self {
            AgentSpec::Builtin(n) => canonical_name(n).unwrap_or(n),
            AgentSpec::External { name, .. } => name,
        }
    }

    pub fn entrant(&self, tuning: AgentTuning) -> Result<Entrant, ConfigError> {
        match self {
            AgentSpec::Builtin(n) => Entrant::builtin(n, tuning).ok_or_else(|| ConfigError::UnknownAgent(n.clone())),
            AgentSpec::External { name, command } => {
                if command.is_empty() {
                    return Err(ConfigError::EmptyCommand(name.clone()));
                }
                let (label, command) = (name.clone(), command.clone());
                Ok(Entrant::new(name.clone(), move || {
                    Ok(Box::new(ExternalAgent::spawn(&label, &command)?) as _)
                }))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    /// Bundled topology names or paths to topology documents.
    pub topologies: Vec<String>,
    pub seed: u64,
    pub tournaments_per_topology: usize,
    pub tasks: usize,
    pub weight_min: f64,
    pub weight_max: f64,
    pub t_bid_ms: u64,
    pub t_plan_ms: u64,
    pub max_overruns: usize,
    pub fleets: Vec<Vec<VehicleSpec>>,
    pub reveal_opponent_fleet: bool,
    pub tuning: AgentTuning,
    pub agents: Vec<AgentSpec>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            topologies: BUNDLED_TOPOLOGIES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            tournaments_per_topology: 3,
            tasks: 50,
            weight_min: DEFAULT_WEIGHT_RANGE.0,
            weight_max: DEFAULT_WEIGHT_RANGE.1,
            t_bid_ms: 5_000,
            t_plan_ms: 30_000,
            max_overruns: DEFAULT_MAX_OVERRUNS,
            fleets: default_fleets(),
            reveal_opponent_fleet: true,
            tuning: AgentTuning::default(),
            agents: crate::agents::BUILTIN_AGENTS
                .iter()
                .map(|s| AgentSpec::Builtin(s.to_string()))
                .collect(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let c: RunConfig = serde_json::from_str(json)?;
        c.check()?;
        Ok(c)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(ConfigError::UnsupportedVersion(self.format_version));
        }
        self.match_config().check()?;
        let mut seen = Vec::new();
        for a in &self.agents {
            if let AgentSpec::Builtin(n) = a {
                canonical_name(n).ok_or_else(|| ConfigError::UnknownAgent(n.clone()))?;
            }
            if let AgentSpec::External { name, command } = a {
                if command.is_empty() {
                    return Err(ConfigError::EmptyCommand(name.clone()));
                }
            }
            let name = a.name().to_string();
            if seen.contains(&name) {
                return Err(ConfigError::DuplicateAgent(name));
            }
            seen.push(name);
        }
        Ok(())
    }

    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            tasks: self.tasks,
            weight_min: self.weight_min,
            weight_max: self.weight_max,
            t_bid_ms: self.t_bid_ms,
            t_plan_ms: self.t_plan_ms,
            max_overruns: self.max_overruns,
            fleets: self.fleets.clone(),
            reveal_opponent_fleet: self.reveal_opponent_fleet,
            tuning: self.tuning,
        }
    }

    pub fn entrants(&self) -> Result<Vec<Entrant>, ConfigError> {
        self.agents.iter().map(|a| a.entrant(self.tuning)).collect()
    }

    pub fn load_topologies(&self) -> Result<Vec<Arc<Topology>>, ConfigError> {
        self.topologies
            .iter()
            .map(|name| {
                Topology::resolve(name).map(Arc::new).map_err(|source| ConfigError::Topology {
                    name: name.clone(),
                    source,
                })
            })
            .collect()
    }
}
