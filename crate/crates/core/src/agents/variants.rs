//! Reference agents built directly on the planners: a centralized fleet
//! planner (local search), a single-vehicle deliberative planner (A* or BFS)
//! and a reactive policy learned by value iteration.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};

use super::{Agent, AgentContext, AgentError, AuctionObservation, BidResponse, FleetState};
use crate::model::{plan_cost, route_km, Company, Plan, Task, TaskDistribution, Vehicle, CAPACITY_EPS};
use crate::planning::insertion::best_slot;
use crate::planning::{
    astar_optimal, bfs_optimal, sls_optimize, value_iteration, Deadline, Heuristic, MdpPolicy, PlanningError,
    ReactiveAction, ReactiveProblem, ReactiveState, SlsConfig,
};
use crate::rng::SimRng;
use crate::topology::{CityId, DistanceMatrix, Topology};

fn not_set_up() -> AgentError {
    AgentError::Crashed("agent used before setup".into())
}

/// Whole-fleet planning by local search. As a bidder it charges its insertion
/// marginal cost, like Honest, but spends a larger search budget at the end.
pub struct Centralized {
    pub iterations: u64,
    pub config: SlsConfig,
    state: Option<(Arc<Topology>, FleetState, SimRng, u64, usize)>,
}

impl Centralized {
    pub fn new(iterations: u64) -> Self {
        Self {
            iterations,
            config: SlsConfig::default(),
            state: None,
        }
    }

    /// Solves a static instance: every task in `tasks` must be served.
    pub fn solve(
        &self,
        tasks: &[Task],
        fleet: &Company,
        dist: &DistanceMatrix,
        deadline: Deadline,
        rng: &mut SimRng,
    ) -> Result<(Plan, f64), PlanningError> {
        let out = sls_optimize(tasks, fleet, dist, deadline.with_iterations(self.iterations), rng, self.config)?;
        Ok((out.plan, out.cost))
    }
}

impl Agent for Centralized {
    fn name(&self) -> &str {
        "Centralized"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.state = Some((
            ctx.topology.clone(),
            FleetState::new(ctx.company.clone()),
            SimRng::seed_from_u64(ctx.seed),
            ctx.t_plan_ms,
            ctx.agent_id,
        ));
        Ok(())
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let (topo, fleet, ..) = self.state.as_mut().ok_or_else(not_set_up)?;
        Ok(fleet
            .marginal(task, topo.dist())
            .map_or(BidResponse::Abstain, |m| BidResponse::Bid(m.max(0.0))))
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        let (topo, fleet, _, _, me) = self.state.as_mut().ok_or_else(not_set_up)?;
        if obs.winner == Some(*me) {
            fleet.commit(&obs.task, topo.dist());
        }
        Ok(())
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let (iterations, config) = (self.iterations, self.config);
        let (topo, fleet, rng, t_plan, _) = self.state.as_mut().ok_or_else(not_set_up)?;
        let cap = Instant::now() + Duration::from_millis(*t_plan * 4 / 5);
        let deadline = Deadline::iterations(iterations).with_instant(cap);
        let out = sls_optimize(won, &fleet.company, topo.dist(), deadline, rng, config)?;
        match fleet.plan_for(won) {
            Some(p) if plan_cost(p, &fleet.company, topo.dist()) < out.cost => Ok(p.clone()),
            _ => Ok(out.plan),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchAlgorithm {
    Astar(Heuristic),
    Bfs,
}

/// Optimal planning for one vehicle. Exact search is used while the won set
/// is at most `exact_limit` tasks; beyond that the route is kept by
/// insertion, since the state space grows exponentially.
pub struct Deliberative {
    pub algorithm: SearchAlgorithm,
    pub exact_limit: usize,
    state: Option<DeliberativeState>,
}

struct DeliberativeState {
    agent_id: usize,
    topology: Arc<Topology>,
    vehicles: usize,
    vehicle: Vehicle,
    route: Vec<crate::model::Action>,
    won: Vec<Task>,
}

impl Deliberative {
    pub fn new(algorithm: SearchAlgorithm) -> Self {
        Self {
            algorithm,
            exact_limit: 10,
            state: None,
        }
    }

    /// Minimum-cost single-vehicle route for `tasks`.
    pub fn solve(&self, tasks: &[Task], vehicle: &Vehicle, dist: &DistanceMatrix) -> Result<(Vec<crate::model::Action>, f64), PlanningError> {
        let out = match self.algorithm {
            SearchAlgorithm::Astar(h) => astar_optimal(tasks, vehicle, dist, h)?,
            SearchAlgorithm::Bfs => bfs_optimal(tasks, vehicle, dist)?,
        };
        Ok((out.route, out.cost))
    }
}

impl Agent for Deliberative {
    fn name(&self) -> &str {
        "Deliberative"
    }

    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.state = Some(DeliberativeState {
            agent_id: ctx.agent_id,
            topology: ctx.topology.clone(),
            vehicles: ctx.company.vehicles.len(),
            vehicle: ctx.company.vehicles[0],
            route: Vec::new(),
            won: Vec::new(),
        });
        Ok(())
    }

    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        let s = self.state.as_ref().ok_or_else(not_set_up)?;
        if task.weight > s.vehicle.capacity + CAPACITY_EPS {
            return Ok(BidResponse::Abstain);
        }
        let v = &s.vehicle;
        Ok(match best_slot(task, v.home, &s.route, v.capacity, s.topology.dist(), None) {
            Some((_, _, km)) => BidResponse::Bid((km * v.cost_per_km).max(0.0)),
            None => BidResponse::Abstain,
        })
    }

    fn observe(&mut self, obs: &AuctionObservation) -> Result<(), AgentError> {
        let s = self.state.as_mut().ok_or_else(not_set_up)?;
        if obs.winner != Some(s.agent_id) {
            return Ok(());
        }
        let v = s.vehicle;
        let (p, d, _) = best_slot(&obs.task, v.home, &s.route, v.capacity, s.topology.dist(), None)
            .ok_or_else(|| AgentError::Crashed(format!("won uncarriable task {}", obs.task.id)))?;
        crate::planning::insertion::insert_at(&mut s.route, obs.task, p, d);
        s.won.push(obs.task);
        Ok(())
    }

    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let (algorithm, limit) = (self.algorithm, self.exact_limit);
        let s = self.state.as_ref().ok_or_else(not_set_up)?;
        let mut plan = Plan::empty(s.vehicles);
        let dist = s.topology.dist();
        let same = {
            let mut a: Vec<_> = s.won.iter().map(|t| t.id).collect();
            let mut b: Vec<_> = won.iter().map(|t| t.id).collect();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        };
        plan.routes[0] = if won.len() <= limit {
            let solver = Deliberative {
                algorithm,
                exact_limit: limit,
                state: None,
            };
            solver.solve(won, &s.vehicle, dist)?.0
        } else if same {
            s.route.clone()
        } else {
            Plan::sequential(1, 0, won).routes.remove(0)
        };
        debug_assert!(route_km(s.vehicle.home, &plan.routes[0], dist).is_finite());
        Ok(plan)
    }
}

/// A policy for the reactive pickup-and-delivery setting: the vehicle sees at
/// most one task in its current city and either carries it or drives on.
pub struct ReactiveAgent<'a> {
    pub problem: ReactiveProblem<'a>,
    pub policy: MdpPolicy,
}

/// Totals of a simulated reactive run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactiveRun {
    pub steps: usize,
    pub accepted: usize,
    pub reward: f64,
}

impl<'a> ReactiveAgent<'a> {
    pub fn train(problem: ReactiveProblem<'a>, discount: f64, epsilon: f64) -> Result<Self, PlanningError> {
        let policy = value_iteration(&problem, discount, epsilon)?;
        Ok(Self { problem, policy })
    }

    pub fn act(&self, state: ReactiveState) -> ReactiveAction {
        self.policy.action(&self.problem, state)
    }

    /// Draws what waits in `city` on arrival.
    pub fn arrive<R: Rng + ?Sized>(problem: &ReactiveProblem<'_>, city: CityId, rng: &mut R) -> ReactiveState {
        let mut u: f64 = rng.gen();
        let n = problem.topology.num_cities();
        for to in (0..n).filter(|&d| d != city) {
            let p = problem.arrival_probability(city, Some(to));
            if u < p {
                return ReactiveState { city, task: Some(to) };
            }
            u -= p;
        }
        ReactiveState { city, task: None }
    }

    /// Follows `choose` for `steps` decisions starting empty-handed at `start`.
    pub fn simulate_with<R, F>(problem: &ReactiveProblem<'_>, start: CityId, steps: usize, rng: &mut R, mut choose: F) -> ReactiveRun
    where
        R: Rng + ?Sized,
        F: FnMut(ReactiveState, &mut R) -> ReactiveAction,
    {
        let mut s = Self::arrive(problem, start, rng);
        let mut run = ReactiveRun {
            steps,
            accepted: 0,
            reward: 0.0,
        };
        for _ in 0..steps {
            let a = choose(s, rng);
            if a == ReactiveAction::Accept {
                run.accepted += 1;
            }
            let (r, to) = problem.transition(s, a);
            run.reward += r;
            s = Self::arrive(problem, to, rng);
        }
        run
    }

    pub fn simulate<R: Rng + ?Sized>(&self, start: CityId, steps: usize, rng: &mut R) -> ReactiveRun {
        Self::simulate_with(&self.problem, start, steps, rng, |s, _| self.act(s))
    }
}

/// Reactive problem for a vehicle on `topology` with uniform tasks.
pub fn reactive_problem(topology: &Topology, distribution: TaskDistribution, cost_per_km: f64) -> ReactiveProblem<'_> {
    ReactiveProblem::new(topology, distribution, cost_per_km)
}
