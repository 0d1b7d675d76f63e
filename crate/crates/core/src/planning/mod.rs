//! Plan construction and improvement.
//!
//! - [`insertion`]: cheapest insertion of one task into a fixed plan (marginal cost).
//! - [`sls`]: anytime stochastic local search over multi-vehicle plans.
//! - [`search`]: optimal single-vehicle plans via A* (MST or zero heuristic) and BFS.
//! - [`mdp`]: value iteration for the reactive pickup-or-move variant.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::model::TaskId;

pub mod insertion;
pub mod mdp;
pub mod search;
pub mod sls;

pub use insertion::{cheapest_insertion, InsertionResult};
pub use mdp::{value_iteration, MdpPolicy, ReactiveAction, ReactiveProblem, ReactiveState, RewardTable};
pub use search::{astar_optimal, bfs_optimal, mst_heuristic, Heuristic, SearchOutcome, SearchState};
pub use sls::{sls_optimize, SlsConfig, SlsOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanningError {
    #[error("task {task} ({weight} kg) does not fit any vehicle (largest capacity {capacity} kg)")]
    Infeasible {
        task: TaskId,
        weight: f64,
        capacity: f64,
    },
    #[error("search supports at most 64 tasks, got {0}")]
    TooManyTasks(usize),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Cooperative stop condition polled by planners at iteration boundaries.
///
/// A wall-clock instant bounds real time; an iteration budget keeps results
/// reproducible. Whichever trips first stops the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Deadline {
    at: Option<Instant>,
    max_iterations: Option<u64>,
}

impl Deadline {
    pub fn never() -> Self {
        Self::default()
    }

    pub fn after(budget: Duration) -> Self {
        Self {
            at: Some(Instant::now() + budget),
            max_iterations: None,
        }
    }

    pub fn iterations(n: u64) -> Self {
        Self {
            at: None,
            max_iterations: Some(n),
        }
    }

    pub fn with_iterations(mut self, n: u64) -> Self {
        self.max_iterations = Some(n);
        self
    }

    pub fn with_instant(mut self, at: Instant) -> Self {
        self.at = Some(at);
        self
    }

    pub fn is_unbounded(&self) -> bool {
        self.at.is_none() && self.max_iterations.is_none()
    }

    #[inline]
    pub fn expired(&self, iteration: u64) -> bool {
        if let Some(max) = self.max_iterations {
            if iteration >= max {
                return true;
            }
        }
        match self.at {
            Some(at) => Instant::now() >= at,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deadline_budgets() {
        assert!(!Deadline::never().expired(u64::MAX - 1));
        let d = Deadline::iterations(3);
        assert!(!d.expired(2));
        assert!(d.expired(3));
        assert!(Deadline::after(Duration::ZERO).expired(0));
        assert!(!Deadline::after(Duration::from_secs(60)).expired(0));
    }
}
