//! Brute-force oracles and small stub agents shared by the integration tests
//! and the acceptance suite. None of these call into the planners they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::sync::Arc;
use std::time::Duration;

use apdp::agents::{Agent, AgentContext, AgentError, AuctionObservation, BidResponse};
use apdp::model::{Action, ActionKind, Company, Constraint, Plan, Task, Vehicle, Violation};
use apdp::planning::{ReactiveAction, ReactiveProblem, ReactiveState};
use apdp::rng::SimRng;
use apdp::topology::{City, Edge, TopologyDoc};
use apdp::{DistanceMatrix, Topology};
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

// ---------- graphs ----------

/// Connected graph: a random spanning tree plus `extra` random chords.
pub fn random_doc(rng: &mut impl Rng, n: usize, extra: usize) -> TopologyDoc {
    let cities = (0..n)
        .map(|id| City {
            id,
            name: format!("C{id}"),
            x_km: rng.gen_range(0.0..100.0),
            y_km: rng.gen_range(0.0..100.0),
        })
        .collect();
    let mut edges = Vec::new();
    for b in 1..n {
        let a = rng.gen_range(0..b);
        edges.push(Edge { a, b, km: rng.gen_range(1..100) as f64 });
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !edges.iter().any(|e| (e.a, e.b) == (a, b) || (e.a, e.b) == (b, a)) {
            edges.push(Edge { a, b, km: rng.gen_range(1..100) as f64 });
        }
    }
    TopologyDoc {
        format_version: 1,
        name: format!("random{n}"),
        description: None,
        cities,
        edges,
    }
}

pub fn random_topology(rng: &mut impl Rng, n: usize, extra: usize) -> Arc<Topology> {
    Arc::new(Topology::from_doc(random_doc(rng, n, extra)).expect("connected by construction"))
}

fn adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push((e.b, e.km));
        adj[e.b].push((e.a, e.km));
    }
    adj
}

/// Single-source shortest paths with a binary heap. Edge weights here are
/// integers, so every sum is exact.
pub fn dijkstra(n: usize, edges: &[Edge], source: usize) -> Vec<f64> {
    let adj = adjacency(n, edges);
    let mut best = vec![f64::INFINITY; n];
    best[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d as f64 > best[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d as f64 + w;
            if nd < best[v] {
                best[v] = nd;
                heap.push(Reverse((nd as u64, v)));
            }
        }
    }
    best
}

/// Minimum over every simple path, by depth-first enumeration.
pub fn shortest_by_paths(n: usize, edges: &[Edge], from: usize, to: usize) -> f64 {
    fn go(adj: &[Vec<(usize, f64)>], at: usize, to: usize, km: f64, seen: &mut Vec<bool>, best: &mut f64) {
        if at == to {
            *best = best.min(km);
            return;
        }
        for &(v, w) in &adj[at] {
            if !seen[v] {
                seen[v] = true;
                go(adj, v, to, km + w, seen, best);
                seen[v] = false;
            }
        }
    }
    let adj = adjacency(n, edges);
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut best = f64::INFINITY;
    go(&adj, from, to, 0.0, &mut seen, &mut best);
    best
}

/// Lightest spanning tree of the complete graph on `nodes` by trying every
/// edge subset of size |nodes| - 1.
pub fn spanning_tree_by_enumeration(nodes: &[usize], dist: &DistanceMatrix) -> f64 {
    let k = nodes.len();
    if k <= 1 {
        return 0.0;
    }
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            pairs.push((i, j));
        }
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << pairs.len()) {
        if mask.count_ones() as usize != k - 1 {
            continue;
        }
        // union-find connectivity check
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut w = 0.0;
        let mut acyclic = true;
        for (e, &(i, j)) in pairs.iter().enumerate() {
            if mask & (1 << e) != 0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri == rj {
                    acyclic = false;
                    break;
                }
                parent[ri] = rj;
                w += dist.get(nodes[i], nodes[j]);
            }
        }
        if acyclic {
            best = best.min(w);
        }
    }
    best
}

// ---------- plans ----------

pub fn task(id: u32, pickup: usize, delivery: usize, weight: f64) -> Task {
    Task { id, pickup, delivery, weight }
}

pub fn random_tasks(rng: &mut impl Rng, count: usize, cities: usize, weights: (f64, f64)) -> Vec<Task> {
    (0..count)
        .map(|i| {
            let p = rng.gen_range(0..cities);
            let mut d = rng.gen_range(0..cities - 1);
            if d >= p {
                d += 1;
            }
            task(i as u32, p, d, rng.gen_range(weights.0..=weights.1))
        })
        .collect()
}

pub fn vehicle(id: usize, home: usize, capacity: f64, cost_per_km: f64) -> Vehicle {
    Vehicle { id, home, capacity, cost_per_km }
}

/// Kilometres of a route, summed leg by leg from home.
pub fn km_of(home: usize, route: &[Action], dist: &DistanceMatrix) -> f64 {
    let mut at = home;
    let mut km = 0.0;
    for a in route {
        let c = match a.kind {
            ActionKind::Pickup => a.task.pickup,
            ActionKind::Deliver => a.task.delivery,
        };
        km += dist.get(at, c);
        at = c;
    }
    km
}

pub fn cost_of(plan: &Plan, fleet: &Company, dist: &DistanceMatrix) -> f64 {
    plan.routes
        .iter()
        .zip(&fleet.vehicles)
        .map(|(r, v)| km_of(v.home, r, dist) * v.cost_per_km)
        .sum()
}

/// Loads never exceed capacity along the route.
pub fn route_fits(route: &[Action], capacity: f64) -> bool {
    let mut load = 0.0;
    let mut on_board: Vec<u32> = Vec::new();
    for a in route {
        match a.kind {
            ActionKind::Pickup => {
                on_board.push(a.task.id);
                load += a.task.weight;
                if load > capacity + 1e-9 {
                    return false;
                }
            }
            ActionKind::Deliver => {
                if let Some(i) = on_board.iter().position(|&t| t == a.task.id) {
                    on_board.remove(i);
                    load -= a.task.weight;
                }
            }
        }
    }
    true
}

/// Violated constraints, as (constraint, task id), found by walking every
/// route action by action.
pub fn replay_violations(plan: &Plan, won: &[Task], fleet: &Company) -> BTreeSet<(Constraint, u32)> {
    let mut out = BTreeSet::new();
    // task -> list of (vehicle, step, is_pickup)
    let mut events: BTreeMap<u32, Vec<(usize, usize, bool)>> = won.iter().map(|t| (t.id, vec![])).collect();
    for (v, route) in plan.routes.iter().enumerate() {
        let cap = fleet.vehicles[v].capacity;
        let mut bag: Vec<(u32, f64)> = Vec::new();
        for (step, a) in route.iter().enumerate() {
            let pickup = a.kind == ActionKind::Pickup;
            events.get_mut(&a.task.id).unwrap().push((v, step, pickup));
            if pickup {
                bag.push((a.task.id, a.task.weight));
                let load: f64 = bag.iter().map(|b| b.1).sum();
                if load > cap + 1e-9 {
                    out.insert((Constraint::Capacity, a.task.id));
                }
            } else if let Some(i) = bag.iter().position(|b| b.0 == a.task.id) {
                bag.remove(i);
            }
        }
    }
    for (id, ev) in events {
        let picks: Vec<_> = ev.iter().filter(|e| e.2).collect();
        let drops: Vec<_> = ev.iter().filter(|e| !e.2).collect();
        if picks.len() != 1 || drops.len() != 1 {
            out.insert((Constraint::Delivery, id));
        } else if picks[0].0 != drops[0].0 {
            out.insert((Constraint::Pairing, id));
        } else if drops[0].1 < picks[0].1 {
            out.insert((Constraint::Precedence, id));
        }
    }
    out
}

/// Task named by a validator violation.
pub fn violation_task(v: &Violation) -> u32 {
    use Violation::*;
    match *v {
        Capacity { task, .. } | Delivery { task, .. } | Pairing { task, .. } | Precedence { task, .. } => task,
    }
}

/// Every ordering of pickups and deliveries of `tasks` on one vehicle that
/// respects precedence and capacity; returns the cheapest cost.
pub fn brute_force_optimum(tasks: &[Task], v: &Vehicle, dist: &DistanceMatrix) -> Option<f64> {
    fn go(
        tasks: &[Task],
        v: &Vehicle,
        dist: &DistanceMatrix,
        route: &mut Vec<Action>,
        state: &mut Vec<u8>,
        load: f64,
        best: &mut Option<f64>,
    ) {
        if state.iter().all(|&s| s == 2) {
            let c = km_of(v.home, route, dist) * v.cost_per_km;
            if best.is_none_or(|b| c < b) {
                *best = Some(c);
            }
            return;
        }
        for i in 0..tasks.len() {
            match state[i] {
                0 if load + tasks[i].weight <= v.capacity + 1e-9 => {
                    state[i] = 1;
                    route.push(Action::pickup(tasks[i]));
                    go(tasks, v, dist, route, state, load + tasks[i].weight, best);
                    route.pop();
                    state[i] = 0;
                }
                1 => {
                    state[i] = 2;
                    route.push(Action::deliver(tasks[i]));
                    go(tasks, v, dist, route, state, load - tasks[i].weight, best);
                    route.pop();
                    state[i] = 1;
                }
                _ => {}
            }
        }
    }
    let mut best = None;
    go(tasks, v, dist, &mut Vec::new(), &mut vec![0; tasks.len()], 0.0, &mut best);
    best
}

/// Optimum over every split of the tasks between the vehicles.
pub fn brute_force_fleet_optimum(tasks: &[Task], fleet: &Company, dist: &DistanceMatrix) -> Option<f64> {
    let m = fleet.vehicles.len();
    let n = tasks.len();
    // best per (vehicle, subset)
    let mut table = vec![vec![None; 1 << n]; m];
    for (vi, v) in fleet.vehicles.iter().enumerate() {
        for mask in 0..1usize << n {
            let sub: Vec<Task> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| tasks[i]).collect();
            table[vi][mask] = brute_force_optimum(&sub, v, dist);
        }
    }
    let mut best: Option<f64> = None;
    for assignment in 0..m.pow(n as u32) {
        let mut masks = vec![0usize; m];
        let mut a = assignment;
        for i in 0..n {
            masks[a % m] |= 1 << i;
            a /= m;
        }
        let total: Option<f64> = (0..m).map(|vi| table[vi][masks[vi]]).sum();
        if let Some(t) = total {
            if best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// Random feasible plan: each task goes to a random vehicle that can carry
/// it, at random pickup and delivery positions, retried until capacity holds.
pub fn random_feasible_plan(rng: &mut impl Rng, tasks: &[Task], fleet: &Company) -> Plan {
    'retry: loop {
        let mut plan = Plan::empty(fleet.vehicles.len());
        for t in tasks {
            let v = rng.gen_range(0..fleet.vehicles.len());
            let route = &mut plan.routes[v];
            let p = rng.gen_range(0..=route.len());
            route.insert(p, Action::pickup(*t));
            let d = rng.gen_range(p + 1..=route.len());
            route.insert(d, Action::deliver(*t));
        }
        for (r, v) in plan.routes.iter().zip(&fleet.vehicles) {
            if !route_fits(r, v.capacity) {
                continue 'retry;
            }
        }
        return plan;
    }
}

/// Exhaustive insertion: every (vehicle, pickup index, delivery index) in
/// that order, costed by recomputing the whole route. Ties within 1e-9 keep
/// the earlier candidate.
pub fn exhaustive_insertion(t: &Task, plan: &Plan, fleet: &Company, dist: &DistanceMatrix) -> Option<(usize, usize, usize, f64)> {
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for (vi, v) in fleet.vehicles.iter().enumerate() {
        let route = &plan.routes[vi];
        let before = km_of(v.home, route, dist) * v.cost_per_km;
        for p in 0..=route.len() {
            for d in p + 1..=route.len() + 1 {
                let mut r = route.clone();
                r.insert(p, Action::pickup(*t));
                r.insert(d, Action::deliver(*t));
                if !route_fits(&r, v.capacity) {
                    continue;
                }
                let delta = km_of(v.home, &r, dist) * v.cost_per_km - before;
                match best {
                    Some((.., b)) if delta >= b - 1e-9 => {}
                    _ => best = Some((vi, p, d, delta)),
                }
            }
        }
    }
    best
}

// ---------- reactive ----------

/// Depth-limited expectimax. Returns the greedy action at the root and the
/// action values, using only the problem's primitive data.
pub struct Expectimax<'a> {
    problem: &'a ReactiveProblem<'a>,
    discount: f64,
    /// arrival[d][city]: expected value of arriving at `city` with `d` steps left
    arrival: Vec<Vec<f64>>,
}

impl<'a> Expectimax<'a> {
    pub fn new(problem: &'a ReactiveProblem<'a>, discount: f64, depth: usize) -> Self {
        let n = problem.topology.num_cities();
        let mut arrival = vec![vec![0.0; n]];
        for d in 1..=depth {
            let prev = arrival[d - 1].clone();
            let row = (0..n)
                .map(|c| {
                    let mut ev = (1.0 - problem.task_presence) * Self::best(problem, discount, &prev, c, None).1;
                    for to in (0..n).filter(|&to| to != c) {
                        let p = problem.task_presence * problem.distribution.delivery_probability(c, to);
                        ev += p * Self::best(problem, discount, &prev, c, Some(to)).1;
                    }
                    ev
                })
                .collect();
            arrival.push(row);
        }
        Self { problem, discount, arrival }
    }

    fn values(problem: &ReactiveProblem<'_>, discount: f64, next: &[f64], city: usize, task: Option<usize>) -> Vec<(ReactiveAction, f64)> {
        let topo = problem.topology;
        let cpk = problem.cost_per_km;
        let mut out = Vec::new();
        if let Some(to) = task {
            let r = problem.rewards.get(city, to) - topo.distance(city, to) * cpk;
            out.push((ReactiveAction::Accept, r + discount * next[to]));
        }
        for &nb in topo.neighbors(city) {
            out.push((ReactiveAction::MoveTo(nb), -topo.distance(city, nb) * cpk + discount * next[nb]));
        }
        out
    }

    fn best(problem: &ReactiveProblem<'_>, discount: f64, next: &[f64], city: usize, task: Option<usize>) -> (ReactiveAction, f64) {
        Self::values(problem, discount, next, city, task)
            .into_iter()
            .fold(None, |acc: Option<(ReactiveAction, f64)>, (a, q)| match acc {
                Some((_, b)) if q <= b => acc,
                _ => Some((a, q)),
            })
            .expect("every city has a neighbour")
    }

    /// Action values at the root with `depth` steps of lookahead.
    pub fn q(&self, s: ReactiveState) -> Vec<(ReactiveAction, f64)> {
        let depth = self.arrival.len() - 1;
        Self::values(self.problem, self.discount, &self.arrival[depth - 1], s.city, s.task)
    }

    pub fn greedy(&self, s: ReactiveState) -> ReactiveAction {
        let depth = self.arrival.len() - 1;
        Self::best(self.problem, self.discount, &self.arrival[depth - 1], s.city, s.task).0
    }
}

// ---------- stub agents ----------

/// Bids whole numbers (so ties happen), abstains now and then, and carries
/// everything sequentially on its largest vehicle.
pub struct RandomBidder {
    pub abstain: f64,
    rng: SimRng,
    company: Option<Company>,
}

impl RandomBidder {
    pub fn new(abstain: f64) -> Self {
        Self { abstain, rng: rng(0), company: None }
    }
}

impl Agent for RandomBidder {
    fn name(&self) -> &str {
        "RandomBidder"
    }
    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.rng = rng(ctx.seed);
        self.company = Some(ctx.company.clone());
        Ok(())
    }
    fn ask_bid(&mut self, _task: &Task) -> Result<BidResponse, AgentError> {
        if self.rng.gen_bool(self.abstain) {
            Ok(BidResponse::Abstain)
        } else {
            Ok(BidResponse::Bid(self.rng.gen_range(0..20) as f64 * 50.0))
        }
    }
    fn observe(&mut self, _: &AuctionObservation) -> Result<(), AgentError> {
        Ok(())
    }
    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        let c = self.company.as_ref().expect("setup first");
        Ok(Plan::sequential(c.vehicles.len(), c.largest_vehicle(), won))
    }
}

/// Delegates to `inner` but sleeps before returning its final plan.
pub struct SlowPlanner<A> {
    pub inner: A,
    pub sleep: Duration,
}

impl<A: Agent> Agent for SlowPlanner<A> {
    fn name(&self) -> &str {
        "SlowPlanner"
    }
    fn setup(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.inner.setup(ctx)
    }
    fn ask_bid(&mut self, task: &Task) -> Result<BidResponse, AgentError> {
        self.inner.ask_bid(task)
    }
    fn observe(&mut self, o: &AuctionObservation) -> Result<(), AgentError> {
        self.inner.observe(o)
    }
    fn final_plan(&mut self, won: &[Task]) -> Result<Plan, AgentError> {
        std::thread::sleep(self.sleep);
        self.inner.final_plan(won)
    }
}
