//! Configuration documents, persisted match records with replay, and the
//! line-delimited JSON protocol for agents running in another process.

pub mod config;
pub mod instance;
pub mod record;
pub mod wire;

pub use config::{AgentSpec, ConfigError, RunConfig};
pub use instance::PlanInstance;
pub use record::{replay, MatchRecord, RecordError, ReplayReport};
pub use wire::{serve, AgentMessage, ExternalAgent, HarnessMessage, ServeOptions, WireError};
