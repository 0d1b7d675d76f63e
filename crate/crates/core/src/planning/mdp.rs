//! Reactive variant: a vehicle roams the network; on arrival a task may be
//! waiting. It either accepts (drives straight to the delivery city and is
//! paid) or moves to a neighbouring city. Solved offline by value iteration.

use serde::{Deserialize, Serialize};

use super::PlanningError;
use crate::model::TaskDistribution;
use crate::topology::{CityId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReactiveAction {
    Accept,
    MoveTo(CityId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReactiveState {
    pub city: CityId,
    /// Delivery city of the task on offer, if any.
    pub task: Option<CityId>,
}

/// Payment for carrying a task from one city to another.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    n: usize,
    reward: Vec<f64>,
}

impl RewardTable {
    /// `beta * dist(from, to) * cost_per_km` for every pair.
    pub fn proportional(topology: &Topology, beta: f64, cost_per_km: f64) -> Self {
        let n = topology.num_cities();
        let mut reward = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                reward[a * n + b] = beta * topology.distance(a, b) * cost_per_km;
            }
        }
        Self { n, reward }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        Self {
            n,
            reward: rows.into_iter().flatten().collect(),
        }
    }

    #[inline]
    pub fn get(&self, from: CityId, to: CityId) -> f64 {
        self.reward[from * self.n + to]
    }
}

pub const DEFAULT_REWARD_FACTOR: f64 = 1.3;
pub const DEFAULT_DISCOUNT: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_TASK_PRESENCE: f64 = 0.8;

/// Everything the Bellman backup needs.
#[derive(Debug, Clone)]
pub struct ReactiveProblem<'a> {
    pub topology: &'a Topology,
    pub distribution: TaskDistribution,
    pub rewards: RewardTable,
    pub cost_per_km: f64,
    /// Probability that some task waits in a city on arrival.
    pub task_presence: f64,
}

impl<'a> ReactiveProblem<'a> {
    pub fn new(topology: &'a Topology, distribution: TaskDistribution, cost_per_km: f64) -> Self {
        Self {
            topology,
            distribution,
            rewards: RewardTable::proportional(topology, DEFAULT_REWARD_FACTOR, cost_per_km),
            cost_per_km,
            task_presence: DEFAULT_TASK_PRESENCE,
        }
    }

    pub fn num_states(&self) -> usize {
        let n = self.topology.num_cities();
        n * (n + 1)
    }

    pub fn state_index(&self, s: ReactiveState) -> usize {
        let n = self.topology.num_cities();
        s.city * (n + 1) + s.task.unwrap_or(n)
    }

    pub fn state(&self, index: usize) -> ReactiveState {
        let n = self.topology.num_cities();
        let (city, t) = (index / (n + 1), index % (n + 1));
        ReactiveState {
            city,
            task: (t < n).then_some(t),
        }
    }

    /// States that can actually occur (a task never goes to its own city).
    pub fn states(&self) -> impl Iterator<Item = ReactiveState> + '_ {
        (0..self.num_states())
            .map(|i| self.state(i))
            .filter(|s| s.task != Some(s.city))
    }

    pub fn actions(&self, s: ReactiveState) -> Vec<ReactiveAction> {
        let mut acts = Vec::with_capacity(self.topology.neighbors(s.city).len() + 1);
        if s.task.is_some() {
            acts.push(ReactiveAction::Accept);
        }
        acts.extend(self.topology.neighbors(s.city).iter().map(|&c| ReactiveAction::MoveTo(c)));
        acts
    }

    /// Probability of arriving at `city` and finding state `(city, task)`.
    pub fn arrival_probability(&self, city: CityId, task: Option<CityId>) -> f64 {
        match task {
            Some(to) => self.task_presence * self.distribution.delivery_probability(city, to),
            None => 1.0 - self.task_presence,
        }
    }

    /// Immediate reward and destination city of an action.
    pub fn transition(&self, s: ReactiveState, a: ReactiveAction) -> (f64, CityId) {
        match a {
            ReactiveAction::Accept => {
                let to = s.task.expect("accept needs a task");
                (
                    self.rewards.get(s.city, to) - self.topology.distance(s.city, to) * self.cost_per_km,
                    to,
                )
            }
            ReactiveAction::MoveTo(to) => (-self.topology.distance(s.city, to) * self.cost_per_km, to),
        }
    }

    /// Expected value of arriving at each city under `values`.
    fn arrival_values(&self, values: &[f64]) -> Vec<f64> {
        let n = self.topology.num_cities();
        (0..n)
            .map(|c| {
                let mut ev = self.arrival_probability(c, None) * values[self.state_index(ReactiveState { city: c, task: None })];
                for d in (0..n).filter(|&d| d != c) {
                    ev += self.arrival_probability(c, Some(d))
                        * values[self.state_index(ReactiveState { city: c, task: Some(d) })];
                }
                ev
            })
            .collect()
    }

    fn q(&self, s: ReactiveState, a: ReactiveAction, discount: f64, arrival: &[f64]) -> f64 {
        let (r, to) = self.transition(s, a);
        r + discount * arrival[to]
    }
}

/// Value table and greedy action per state.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpPolicy {
    pub values: Vec<f64>,
    pub actions: Vec<Option<ReactiveAction>>,
    pub discount: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl MdpPolicy {
    pub fn value(&self, problem: &ReactiveProblem<'_>, s: ReactiveState) -> f64 {
        self.values[problem.state_index(s)]
    }

    pub fn action(&self, problem: &ReactiveProblem<'_>, s: ReactiveState) -> ReactiveAction {
        self.actions[problem.state_index(s)].expect("reachable state has an action")
    }

    /// Action values of every available action under this policy's values.
    pub fn q_values(&self, problem: &ReactiveProblem<'_>, s: ReactiveState) -> Vec<(ReactiveAction, f64)> {
        let arrival = problem.arrival_values(&self.values);
        problem
            .actions(s)
            .into_iter()
            .map(|a| (a, problem.q(s, a, self.discount, &arrival)))
            .collect()
    }
}

/// Synchronous Bellman backups until the largest change drops below `epsilon`,
/// then the greedy policy of the final values (first best action on ties, in
/// the order Accept, then neighbours ascending).
pub fn value_iteration(problem: &ReactiveProblem<'_>, discount: f64, epsilon: f64) -> Result<MdpPolicy, PlanningError> {
    if !(0.0..1.0).contains(&discount) {
        return Err(PlanningError::BadParameter(format!("discount {discount} outside [0, 1)")));
    }
    if !(epsilon > 0.0) {
        return Err(PlanningError::BadParameter(format!("epsilon {epsilon} must be positive")));
    }
    if !(0.0..=1.0).contains(&problem.task_presence) {
        return Err(PlanningError::BadParameter(format!(
            "task presence {} outside [0, 1]",
            problem.task_presence
        )));
    }
    if problem.topology.num_cities() < 2 {
        return Err(PlanningError::BadParameter("need at least two cities".into()));
    }
    let states: Vec<ReactiveState> = problem.states().collect();
    let mut values = vec![0.0; problem.num_states()];
    let mut iterations = 0;
    let residual = loop {
        let arrival = problem.arrival_values(&values);
        let mut next = values.clone();
        let mut residual = 0.0f64;
        for &s in &states {
            let best = problem
                .actions(s)
                .into_iter()
                .map(|a| problem.q(s, a, discount, &arrival))
                .fold(f64::NEG_INFINITY, f64::max);
            let i = problem.state_index(s);
            residual = residual.max((best - values[i]).abs());
            next[i] = best;
        }
        values = next;
        iterations += 1;
        if residual < epsilon {
            break residual;
        }
    };

    let arrival = problem.arrival_values(&values);
    let mut actions = vec![None; problem.num_states()];
    for &s in &states {
        let mut best: Option<(ReactiveAction, f64)> = None;
        for a in problem.actions(s) {
            let q = problem.q(s, a, discount, &arrival);
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((a, q));
            }
        }
        actions[problem.state_index(s)] = best.map(|(a, _)| a);
    }
    Ok(MdpPolicy {
        values,
        actions,
        discount,
        residual,
        iterations,
    })
}
