//! Optimal single-vehicle plans by state-space search.
//!
//! A state is the vehicle's city plus two task bitsets: tasks on board and
//! tasks still waiting at their pickup city. Transitions pick up a waiting
//! task (if it fits) or deliver a carried one; the edge cost is the shortest
//! distance between the two cities times the vehicle's cost per km.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::PlanningError;
use crate::model::{Action, Task, Vehicle, CAPACITY_EPS};
use crate::topology::{mst_weight, CityId, DistanceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    /// Cost of a minimum spanning tree over the cities still to be visited.
    Mst,
    /// Uniform-cost search.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchState {
    pub city: CityId,
    /// Bit `i` set: `tasks[i]` is on board.
    pub carried: u64,
    /// Bit `i` set: `tasks[i]` not yet picked up.
    pub remaining: u64,
    pub km: f64,
}

impl SearchState {
    pub fn is_goal(&self) -> bool {
        self.carried == 0 && self.remaining == 0
    }

    fn key(&self) -> (CityId, u64, u64) {
        (self.city, self.carried, self.remaining)
    }

    fn load(&self, tasks: &[Task]) -> f64 {
        bits(self.carried).map(|i| tasks[i].weight).sum()
    }
}

fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Admissible lower bound on the remaining cost from `state`: the vehicle
/// still has to visit the current city, every carried task's delivery city
/// and both cities of every waiting task, and any route through them is a
/// spanning tree of that set.
pub fn mst_heuristic(state: &SearchState, tasks: &[Task], vehicle: &Vehicle, dist: &DistanceMatrix) -> f64 {
    mst_km(state, tasks, dist) * vehicle.cost_per_km
}

fn mst_km(state: &SearchState, tasks: &[Task], dist: &DistanceMatrix) -> f64 {
    if state.is_goal() {
        return 0.0;
    }
    let mut cities = vec![state.city];
    cities.extend(bits(state.carried).map(|i| tasks[i].delivery));
    for i in bits(state.remaining) {
        cities.push(tasks[i].pickup);
        cities.push(tasks[i].delivery);
    }
    mst_weight(&cities, dist).expect("non-empty")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Route for the single vehicle.
    pub route: Vec<Action>,
    pub cost: f64,
    /// States taken off the frontier and expanded.
    pub expanded: usize,
}

fn check(tasks: &[Task], vehicle: &Vehicle) -> Result<(), PlanningError> {
    if tasks.len() > 64 {
        return Err(PlanningError::TooManyTasks(tasks.len()));
    }
    if let Some(t) = tasks.iter().find(|t| t.weight > vehicle.capacity + CAPACITY_EPS) {
        return Err(PlanningError::Infeasible {
            task: t.id,
            weight: t.weight,
            capacity: vehicle.capacity,
        });
    }
    Ok(())
}

fn successors<'a>(
    state: &'a SearchState,
    tasks: &'a [Task],
    vehicle: &'a Vehicle,
    dist: &'a DistanceMatrix,
) -> impl Iterator<Item = (SearchState, Action)> + 'a {
    let load = state.load(tasks);
    let picks = bits(state.remaining)
        .filter(move |&i| load + tasks[i].weight <= vehicle.capacity + CAPACITY_EPS)
        .map(move |i| {
            let t = tasks[i];
            (
                SearchState {
                    city: t.pickup,
                    carried: state.carried | (1 << i),
                    remaining: state.remaining & !(1 << i),
                    km: state.km + dist.get(state.city, t.pickup),
                },
                Action::pickup(t),
            )
        });
    let drops = bits(state.carried).map(move |i| {
        let t = tasks[i];
        (
            SearchState {
                city: t.delivery,
                carried: state.carried & !(1 << i),
                remaining: state.remaining,
                km: state.km + dist.get(state.city, t.delivery),
            },
            Action::deliver(t),
        )
    });
    picks.chain(drops)
}

fn start(tasks: &[Task], vehicle: &Vehicle) -> SearchState {
    SearchState {
        city: vehicle.home,
        carried: 0,
        remaining: if tasks.is_empty() { 0 } else { u64::MAX >> (64 - tasks.len()) },
        km: 0.0,
    }
}

struct Node {
    state: SearchState,
    parent: Option<usize>,
    action: Option<Action>,
}

fn unwind(nodes: &[Node], mut at: usize) -> Vec<Action> {
    let mut route = Vec::new();
    while let Some(a) = nodes[at].action {
        route.push(a);
        at = nodes[at].parent.expect("non-root has parent");
    }
    route.reverse();
    route
}

struct Open {
    f: f64,
    g: f64,
    seq: usize,
    node: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // max-heap: lowest f first, then deepest g, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

/// A* over the single-vehicle state space. With [`Heuristic::Zero`] this is
/// uniform-cost search; both return a minimum-cost route.
pub fn astar_optimal(
    tasks: &[Task],
    vehicle: &Vehicle,
    dist: &DistanceMatrix,
    heuristic: Heuristic,
) -> Result<SearchOutcome, PlanningError> {
    check(tasks, vehicle)?;
    let h = |s: &SearchState| match heuristic {
        Heuristic::Mst => mst_km(s, tasks, dist),
        Heuristic::Zero => 0.0,
    };
    let root = start(tasks, vehicle);
    let mut nodes = vec![Node {
        state: root,
        parent: None,
        action: None,
    }];
    let mut open = BinaryHeap::new();
    let mut best_g: HashMap<(CityId, u64, u64), f64> = HashMap::new();
    best_g.insert(root.key(), 0.0);
    open.push(Open {
        f: h(&root),
        g: 0.0,
        seq: 0,
        node: 0,
    });
    let mut seq = 1;
    let mut expanded = 0;

    while let Some(Open { node, .. }) = open.pop() {
        let state = nodes[node].state;
        if state.is_goal() {
            return Ok(SearchOutcome {
                route: unwind(&nodes, node),
                cost: state.km * vehicle.cost_per_km,
                expanded,
            });
        }
        // stale entry: a cheaper way to this state was queued later
        if best_g.get(&state.key()).is_some_and(|&g| g < state.km) {
            continue;
        }
        expanded += 1;
        for (next, action) in successors(&state, tasks, vehicle, dist) {
            let key = next.key();
            if best_g.get(&key).is_some_and(|&g| g <= next.km) {
                continue;
            }
            best_g.insert(key, next.km);
            nodes.push(Node {
                state: next,
                parent: Some(node),
                action: Some(action),
            });
            open.push(Open {
                f: next.km + h(&next),
                g: next.km,
                seq,
                node: nodes.len() - 1,
            });
            seq += 1;
        }
    }
    unreachable!("every task fits the vehicle, so a goal state is reachable")
}

/// Breadth-first sweep over the whole state space, layer by layer, keeping the
/// cheapest way to reach each state. Exhaustive, so only for small inputs.
pub fn bfs_optimal(tasks: &[Task], vehicle: &Vehicle, dist: &DistanceMatrix) -> Result<SearchOutcome, PlanningError> {
    check(tasks, vehicle)?;
    let root = start(tasks, vehicle);
    let mut nodes = vec![Node {
        state: root,
        parent: None,
        action: None,
    }];
    let mut layer = vec![0usize];
    let mut expanded = 0;
    for _ in 0..2 * tasks.len() {
        let mut next_layer: HashMap<(CityId, u64, u64), usize> = HashMap::new();
        let mut order = Vec::new();
        for &n in &layer {
            expanded += 1;
            let state = nodes[n].state;
            for (next, action) in successors(&state, tasks, vehicle, dist) {
                match next_layer.get(&next.key()) {
                    Some(&existing) if nodes[existing].state.km <= next.km => {}
                    Some(&existing) => {
                        nodes[existing] = Node {
                            state: next,
                            parent: Some(n),
                            action: Some(action),
                        };
                    }
                    None => {
                        nodes.push(Node {
                            state: next,
                            parent: Some(n),
                            action: Some(action),
                        });
                        next_layer.insert(next.key(), nodes.len() - 1);
                        order.push(nodes.len() - 1);
                    }
                }
            }
        }
        layer = order;
    }
    let goal = layer
        .into_iter()
        .filter(|&n| nodes[n].state.is_goal())
        .min_by(|&a, &b| nodes[a].state.km.total_cmp(&nodes[b].state.km))
        .expect("a goal state is reachable");
    Ok(SearchOutcome {
        route: unwind(&nodes, goal),
        cost: nodes[goal].state.km * vehicle.cost_per_km,
        expanded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{plan_cost, validate_plan, Company, Plan};

    fn line() -> DistanceMatrix {
        let xs = [0.0f64, 2.0, 5.0, 9.0];
        DistanceMatrix::from_rows(xs.iter().map(|a| xs.iter().map(|b| (a - b).abs()).collect()).collect())
    }

    fn van(capacity: f64) -> Vehicle {
        Vehicle {
            id: 0,
            home: 0,
            capacity,
            cost_per_km: 2.0,
        }
    }

    #[test]
    fn single_task_is_forced() {
        let t = Task::new(0, 2, 1, 1.0).unwrap();
        for h in [Heuristic::Mst, Heuristic::Zero] {
            let out = astar_optimal(&[t], &van(5.0), &line(), h).unwrap();
            assert_eq!(out.route, vec![Action::pickup(t), Action::deliver(t)]);
            assert_eq!(out.cost, (5.0 + 3.0) * 2.0);
        }
    }

    #[test]
    fn no_tasks() {
        let out = astar_optimal(&[], &van(5.0), &line(), Heuristic::Mst).unwrap();
        assert!(out.route.is_empty());
        assert_eq!(out.cost, 0.0);
        assert_eq!(bfs_optimal(&[], &van(5.0), &line()).unwrap().cost, 0.0);
    }

    #[test]
    fn oversized_task() {
        let t = Task::new(4, 2, 1, 9.0).unwrap();
        assert!(matches!(
            astar_optimal(&[t], &van(5.0), &line(), Heuristic::Mst),
            Err(PlanningError::Infeasible { task: 4, .. })
        ));
    }

    #[test]
    fn batching_beats_sequential() {
        let a = Task::new(0, 1, 3, 1.0).unwrap();
        let b = Task::new(1, 2, 3, 1.0).unwrap();
        let v = van(5.0);
        let out = astar_optimal(&[a, b], &v, &line(), Heuristic::Mst).unwrap();
        // 0 -> 1 -> 2 -> 3 with both on board: 9 km
        assert_eq!(out.cost, 18.0);
        let fleet = Company::new(0, vec![v]).unwrap();
        let plan = Plan {
            routes: vec![out.route.clone()],
        };
        assert!(validate_plan(&plan, &[a, b], &fleet).unwrap().is_ok());
        assert_eq!(plan_cost(&plan, &fleet, &line()), out.cost);
        assert_eq!(bfs_optimal(&[a, b], &v, &line()).unwrap().cost, 18.0);
        // capacity forces one at a time
        let out = astar_optimal(
            &[Task { weight: 3.0, ..a }, Task { weight: 3.0, ..b }],
            &van(5.0),
            &line(),
            Heuristic::Zero,
        )
        .unwrap();
        assert!(out.cost > 18.0);
    }

    #[test]
    fn heuristic_zero_at_goal_and_bounded_by_direct_path() {
        let t = Task::new(0, 2, 3, 1.0).unwrap();
        let v = van(5.0);
        let goal = SearchState {
            city: 3,
            carried: 0,
            remaining: 0,
            km: 0.0,
        };
        assert_eq!(mst_heuristic(&goal, &[t], &v, &line()), 0.0);
        let s = SearchState {
            city: 0,
            carried: 0,
            remaining: 1,
            km: 0.0,
        };
        let h = mst_heuristic(&s, &[t], &v, &line());
        assert!(h <= (line().get(0, 2) + line().get(2, 3)) * v.cost_per_km);
    }
}
