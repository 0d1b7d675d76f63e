//! Anytime stochastic local search for the multi-vehicle pickup and delivery
//! plan.
//!
//! The search starts from every task on the largest vehicle, served one after
//! another in id order. Each iteration, with probability `p_best`, it moves to
//! the best neighbour of the current plan (even if that neighbour is worse);
//! otherwise the current plan is kept. Neighbours move one task: either to its
//! cheapest slot on another vehicle or a different slot on its own, or to
//! random positions of a random vehicle. An improving cheapest relocation is
//! always preferred; failing that, the best of a few random relocations is
//! taken, which keeps the walk from cycling between the same few plans. After
//! `restart_after` iterations without a new best, the search restarts from
//! the initial plan.

use rand::Rng;

use super::insertion::{best_slot, insert_at};
use super::{Deadline, PlanningError};
use crate::model::{plan_cost, route_km, Action, ActionKind, Company, Plan, Task, CAPACITY_EPS};
use crate::topology::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlsConfig {
    /// Probability of taking the best neighbour in an iteration.
    pub p_best: f64,
    /// Non-improving iterations before restarting from the initial plan.
    pub restart_after: u64,
    /// Random neighbours drawn per iteration; the cheapest is taken.
    pub samples: usize,
}

impl Default for SlsConfig {
    fn default() -> Self {
        Self {
            p_best: 0.35,
            restart_after: 2_000,
            samples: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlsOutcome {
    pub plan: Plan,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: u64,
    /// `(iteration, best cost)` recorded at start and on every improvement.
    pub best_history: Vec<(u64, f64)>,
}

/// Every task on the largest vehicle, sequentially, in task-id order.
pub fn initial_plan(won: &[Task], fleet: &Company) -> Result<Plan, PlanningError> {
    let capacity = fleet.max_capacity();
    let mut tasks = won.to_vec();
    tasks.sort_by_key(|t| t.id);
    if let Some(t) = tasks.iter().find(|t| t.weight > capacity + CAPACITY_EPS) {
        return Err(PlanningError::Infeasible {
            task: t.id,
            weight: t.weight,
            capacity,
        });
    }
    Ok(Plan::sequential(fleet.vehicles.len(), fleet.largest_vehicle(), &tasks))
}

struct Solution {
    plan: Plan,
    route_costs: Vec<f64>,
    cost: f64,
}

impl Solution {
    fn new(plan: Plan, fleet: &Company, dist: &DistanceMatrix) -> Self {
        let route_costs = plan
            .routes
            .iter()
            .zip(&fleet.vehicles)
            .map(|(r, v)| route_km(v.home, r, dist) * v.cost_per_km)
            .collect();
        let mut s = Self {
            plan,
            route_costs,
            cost: 0.0,
        };
        s.total();
        s
    }

    fn total(&mut self) {
        self.cost = self.route_costs.iter().sum();
    }

    fn recost(&mut self, vehicle: usize, fleet: &Company, dist: &DistanceMatrix) {
        let v = &fleet.vehicles[vehicle];
        self.route_costs[vehicle] = route_km(v.home, &self.plan.routes[vehicle], dist) * v.cost_per_km;
    }
}

/// Smallest saving that counts as an improving relocation.
const IMPROVE_EPS: f64 = 1e-9;

/// A task moved out of route `from` into route `to`. When both are the same
/// vehicle, `target` is the whole new route.
struct Move {
    from: usize,
    removed: Vec<Action>,
    to: usize,
    target: Vec<Action>,
    /// Total plan cost after the move.
    cost: f64,
}

fn fits(route: &[Action], capacity: f64) -> bool {
    let mut load = 0.0;
    for a in route {
        match a.kind {
            ActionKind::Pickup => {
                load += a.task.weight;
                if load > capacity + CAPACITY_EPS {
                    return false;
                }
            }
            ActionKind::Deliver => load -= a.task.weight,
        }
    }
    true
}

/// One random neighbour: a random task of a random vehicle moved to random
/// pickup and delivery positions of a random vehicle (possibly the same one).
/// Returns the two changed routes and the new total cost.
fn random_neighbor<R: Rng + ?Sized>(
    sol: &Solution,
    fleet: &Company,
    dist: &DistanceMatrix,
    rng: &mut R,
) -> Option<Move> {
    let busy: Vec<usize> = (0..sol.plan.routes.len())
        .filter(|&v| !sol.plan.routes[v].is_empty())
        .collect();
    let from = *busy.get(rng.gen_range(0..busy.len().max(1)))?;
    let route = &sol.plan.routes[from];
    let task = route[rng.gen_range(0..route.len())].task;
    let removed: Vec<Action> = route.iter().filter(|a| a.task.id != task.id).copied().collect();
    let to = rng.gen_range(0..fleet.vehicles.len());
    let v = &fleet.vehicles[to];
    if task.weight > v.capacity + CAPACITY_EPS {
        return None;
    }
    let mut target = if to == from { removed.clone() } else { sol.plan.routes[to].clone() };
    let p = rng.gen_range(0..=target.len());
    let d = rng.gen_range(p + 1..=target.len() + 1);
    insert_at(&mut target, task, p, d);
    if !fits(&target, v.capacity) {
        return None;
    }
    let vf = &fleet.vehicles[from];
    let cost = if to == from {
        sol.cost - sol.route_costs[from] + route_km(v.home, &target, dist) * v.cost_per_km
    } else {
        sol.cost - sol.route_costs[from] - sol.route_costs[to]
            + route_km(vf.home, &removed, dist) * vf.cost_per_km
            + route_km(v.home, &target, dist) * v.cost_per_km
    };
    Some(Move {
        from,
        removed,
        to,
        target,
        cost,
    })
}

/// The best relocation of one random task: taken out and re-inserted at its
/// cheapest slot on every other vehicle, or the cheapest different slot on
/// its own.
fn greedy_neighbor<R: Rng + ?Sized>(
    sol: &Solution,
    fleet: &Company,
    dist: &DistanceMatrix,
    rng: &mut R,
) -> Option<Move> {
    let busy: Vec<usize> = (0..sol.plan.routes.len())
        .filter(|&v| !sol.plan.routes[v].is_empty())
        .collect();
    let from = *busy.get(rng.gen_range(0..busy.len().max(1)))?;
    let route = &sol.plan.routes[from];
    let task = route[rng.gen_range(0..route.len())].task;
    let pick_pos = route.iter().position(|a| a.task.id == task.id && a.kind == ActionKind::Pickup)?;
    let del_pos = route.iter().position(|a| a.task.id == task.id && a.kind == ActionKind::Deliver)?;
    let removed: Vec<Action> = route.iter().filter(|a| a.task.id != task.id).copied().collect();
    let vf = &fleet.vehicles[from];
    let base = sol.cost - sol.route_costs[from] + route_km(vf.home, &removed, dist) * vf.cost_per_km;
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for (to, v) in fleet.vehicles.iter().enumerate() {
        let slot = if to == from {
            best_slot(&task, v.home, &removed, v.capacity, dist, Some((pick_pos, del_pos)))
        } else {
            best_slot(&task, v.home, &sol.plan.routes[to], v.capacity, dist, None)
        };
        if let Some((p, d, km)) = slot {
            let total = base + km * v.cost_per_km;
            if best.is_none_or(|(b, ..)| total < b) {
                best = Some((total, to, p, d));
            }
        }
    }
    let (cost, to, p, d) = best?;
    let mut target = if to == from { removed.clone() } else { sol.plan.routes[to].clone() };
    insert_at(&mut target, task, p, d);
    Some(Move {
        from,
        removed,
        to,
        target,
        cost,
    })
}

/// One move: the best relocation of a random task if it improves the plan,
/// otherwise the cheapest of `samples` random neighbours, even if that one is
/// worse. Returns `false` when no neighbour was found.
fn step_to_best_neighbor<R: Rng + ?Sized>(
    sol: &mut Solution,
    fleet: &Company,
    dist: &DistanceMatrix,
    rng: &mut R,
    samples: usize,
) -> bool {
    let mut best = greedy_neighbor(sol, fleet, dist, rng).filter(|n| n.cost < sol.cost - IMPROVE_EPS);
    if best.is_none() {
        for _ in 0..samples {
            if let Some(n) = random_neighbor(sol, fleet, dist, rng) {
                if best.as_ref().is_none_or(|b| n.cost < b.cost) {
                    best = Some(n);
                }
            }
        }
    }
    let Some(m) = best else {
        return false;
    };
    if m.to != m.from {
        sol.plan.routes[m.from] = m.removed;
        sol.recost(m.from, fleet, dist);
    }
    sol.plan.routes[m.to] = m.target;
    sol.recost(m.to, fleet, dist);
    sol.total();
    true
}

/// Runs the search until `deadline` trips and returns the best plan seen.
///
/// With an unbounded deadline the search would never stop, so one is
/// rejected as a bad parameter.
pub fn sls_optimize<R: Rng + ?Sized>(
    won: &[Task],
    fleet: &Company,
    dist: &DistanceMatrix,
    deadline: Deadline,
    rng: &mut R,
    config: SlsConfig,
) -> Result<SlsOutcome, PlanningError> {
    if deadline.is_unbounded() {
        return Err(PlanningError::BadParameter(
            "local search needs a time or iteration budget".into(),
        ));
    }
    if !(0.0..=1.0).contains(&config.p_best) {
        return Err(PlanningError::BadParameter(format!("p_best = {}", config.p_best)));
    }
    let initial = initial_plan(won, fleet)?;
    let initial_cost = plan_cost(&initial, fleet, dist);
    let mut current = Solution::new(initial.clone(), fleet, dist);
    let mut best = current.plan.clone();
    let mut best_cost = current.cost;
    let mut history = vec![(0, best_cost)];
    let mut stale = 0u64;
    let mut iteration = 0u64;

    if won.is_empty() {
        return Ok(SlsOutcome {
            plan: best,
            cost: best_cost,
            initial_cost,
            iterations: 0,
            best_history: history,
        });
    }

    while !deadline.expired(iteration) {
        iteration += 1;
        if rng.gen::<f64>() < config.p_best {
            step_to_best_neighbor(&mut current, fleet, dist, rng, config.samples);
        }
        if current.cost < best_cost {
            best_cost = current.cost;
            best = current.plan.clone();
            history.push((iteration, best_cost));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.restart_after {
                current = Solution::new(initial.clone(), fleet, dist);
                stale = 0;
            }
        }
    }

    Ok(SlsOutcome {
        cost: plan_cost(&best, fleet, dist),
        plan: best,
        initial_cost,
        iterations: iteration,
        best_history: history,
    })
}
