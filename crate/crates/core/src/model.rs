//! Tasks, fleets and plans, plus the legality check and cost accounting that
//! define the objective.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{CityId, DistanceMatrix};

pub type TaskId = u32;

/// Slack allowed when comparing a vehicle load against its capacity.
pub const CAPACITY_EPS: f64 = 1e-9;

pub const DEFAULT_WEIGHT_RANGE: (f64, f64) = (3.0, 30.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("task {0}: pickup and delivery city must differ")]
    DegenerateTask(TaskId),
    #[error("task {id}: weight must be positive and finite, got {weight}")]
    BadWeight { id: TaskId, weight: f64 },
    #[error("invalid weight range [{0}, {1}]")]
    BadWeightRange(f64, f64),
    #[error("task distribution needs at least two cities, got {0}")]
    TooFewCities(usize),
    #[error("company {0} has no vehicles")]
    EmptyFleet(usize),
    #[error("company {company}: duplicate vehicle id {vehicle}")]
    DuplicateVehicle { company: usize, vehicle: usize },
    #[error("vehicle {0}: capacity and cost per km must be positive")]
    BadVehicle(usize),
    #[error("plan has {got} routes but the fleet has {expected} vehicles")]
    RouteCount { got: usize, expected: usize },
    #[error("vehicle {vehicle} position {position}: action references unknown task {task}")]
    UnknownTask {
        vehicle: usize,
        position: usize,
        task: TaskId,
    },
    #[error("city {city} out of range for a {cities}-city topology")]
    CityOutOfRange { city: CityId, cities: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: TaskId,
    pub pickup: CityId,
    pub delivery: CityId,
    pub weight: f64,
}

impl Task {
    pub fn new(id: TaskId, pickup: CityId, delivery: CityId, weight: f64) -> Result<Self, ModelError> {
        let t = Task {
            id,
            pickup,
            delivery,
            weight,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.pickup == self.delivery {
            return Err(ModelError::DegenerateTask(self.id));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(ModelError::BadWeight {
                id: self.id,
                weight: self.weight,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "task {} ({} -> {}, {} kg)",
            self.id, self.pickup, self.delivery, self.weight
        )
    }
}

/// Uniform distribution over ordered city pairs (pickup != delivery) and
/// weights in `[weight_min, weight_max]`. Known to every agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDistribution {
    pub cities: usize,
    pub weight_min: f64,
    pub weight_max: f64,
}

impl TaskDistribution {
    pub fn new(cities: usize, weight_min: f64, weight_max: f64) -> Result<Self, ModelError> {
        let d = Self {
            cities,
            weight_min,
            weight_max,
        };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.cities < 2 {
            return Err(ModelError::TooFewCities(self.cities));
        }
        if !(self.weight_min > 0.0 && self.weight_min <= self.weight_max && self.weight_max.is_finite()) {
            return Err(ModelError::BadWeightRange(self.weight_min, self.weight_max));
        }
        Ok(())
    }

    /// Probability that a task picked up at `from` goes to `to`.
    pub fn delivery_probability(&self, from: CityId, to: CityId) -> f64 {
        if from == to {
            0.0
        } else {
            1.0 / (self.cities - 1) as f64
        }
    }
}

/// Draws one task. Consumes exactly three values from `rng`.
pub fn sample_task<R: Rng + ?Sized>(dist: &TaskDistribution, id: TaskId, rng: &mut R) -> Task {
    let pickup = rng.gen_range(0..dist.cities);
    let mut delivery = rng.gen_range(0..dist.cities - 1);
    if delivery >= pickup {
        delivery += 1;
    }
    let weight = if dist.weight_min == dist.weight_max {
        // still draw so the stream position does not depend on the range
        let _: f64 = rng.gen();
        dist.weight_min
    } else {
        rng.gen_range(dist.weight_min..=dist.weight_max)
    };
    Task {
        id,
        pickup,
        delivery,
        weight,
    }
}

/// Infinite task stream with ids 0, 1, 2, ...
pub struct TaskSampler<R> {
    dist: TaskDistribution,
    rng: R,
    next_id: TaskId,
}

impl<R: Rng> TaskSampler<R> {
    pub fn new(dist: TaskDistribution, rng: R) -> Self {
        Self {
            dist,
            rng,
            next_id: 0,
        }
    }
}

impl<R: Rng> Iterator for TaskSampler<R> {
    type Item = Task;

    fn next(&mut self) -> Option<Task> {
        let t = sample_task(&self.dist, self.next_id, &mut self.rng);
        self.next_id += 1;
        Some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vehicle {
    pub id: usize,
    pub home: CityId,
    pub capacity: f64,
    pub cost_per_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Company {
    pub id: usize,
    pub vehicles: Vec<Vehicle>,
}

impl Company {
    pub fn new(id: usize, vehicles: Vec<Vehicle>) -> Result<Self, ModelError> {
        let c = Self { id, vehicles };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.vehicles.is_empty() {
            return Err(ModelError::EmptyFleet(self.id));
        }
        let mut seen = std::collections::HashSet::new();
        for v in &self.vehicles {
            if !seen.insert(v.id) {
                return Err(ModelError::DuplicateVehicle {
                    company: self.id,
                    vehicle: v.id,
                });
            }
            if !(v.capacity > 0.0 && v.cost_per_km > 0.0 && v.capacity.is_finite() && v.cost_per_km.is_finite()) {
                return Err(ModelError::BadVehicle(v.id));
            }
        }
        Ok(())
    }

    pub fn check_cities(&self, cities: usize) -> Result<(), ModelError> {
        for v in &self.vehicles {
            if v.home >= cities {
                return Err(ModelError::CityOutOfRange { city: v.home, cities });
            }
        }
        Ok(())
    }

    /// Index of the vehicle with the largest capacity (lowest index on ties).
    pub fn largest_vehicle(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.capacity > self.vehicles[best].capacity {
                best = i;
            }
        }
        best
    }

    pub fn max_capacity(&self) -> f64 {
        self.vehicles[self.largest_vehicle()].capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Pickup,
    Deliver,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub task: Task,
}

impl Action {
    pub fn pickup(task: Task) -> Self {
        Self {
            kind: ActionKind::Pickup,
            task,
        }
    }

    pub fn deliver(task: Task) -> Self {
        Self {
            kind: ActionKind::Deliver,
            task,
        }
    }

    #[inline]
    pub fn city(&self) -> CityId {
        match self.kind {
            ActionKind::Pickup => self.task.pickup,
            ActionKind::Deliver => self.task.delivery,
        }
    }
}

/// One ordered action sequence per vehicle, indexed like `Company::vehicles`.
/// Between consecutive action cities the vehicle drives the shortest path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plan {
    pub routes: Vec<Vec<Action>>,
}

impl Plan {
    pub fn empty(vehicles: usize) -> Self {
        Self {
            routes: vec![Vec::new(); vehicles],
        }
    }

    /// `tasks` served one after another by a single vehicle.
    pub fn sequential(vehicles: usize, vehicle: usize, tasks: &[Task]) -> Self {
        let mut plan = Self::empty(vehicles);
        for t in tasks {
            plan.routes[vehicle].push(Action::pickup(*t));
            plan.routes[vehicle].push(Action::deliver(*t));
        }
        plan
    }

    pub fn num_actions(&self) -> usize {
        self.routes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.iter().all(Vec::is_empty)
    }

    /// Tasks picked up anywhere in the plan, ordered by id.
    pub fn tasks(&self) -> Vec<Task> {
        let mut m = BTreeMap::new();
        for a in self.routes.iter().flatten() {
            m.insert(a.task.id, a.task);
        }
        m.into_values().collect()
    }

    pub fn to_doc(&self) -> PlanDoc {
        PlanDoc {
            format_version: PLAN_FORMAT_VERSION,
            routes: self
                .routes
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|a| ActionRef {
                            action: a.kind,
                            task: a.task.id,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

pub const PLAN_FORMAT_VERSION: u32 = 1;

fn plan_format_version() -> u32 {
    PLAN_FORMAT_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRef {
    pub action: ActionKind,
    pub task: TaskId,
}

/// Serialized plan: actions reference tasks by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDoc {
    #[serde(default = "plan_format_version")]
    pub format_version: u32,
    pub routes: Vec<Vec<ActionRef>>,
}

impl PlanDoc {
    /// Resolves task ids against `tasks`.
    pub fn resolve(&self, tasks: &[Task]) -> Result<Plan, ModelError> {
        let by_id: HashMap<TaskId, &Task> = tasks.iter().map(|t| (t.id, t)).collect();
        let mut routes = Vec::with_capacity(self.routes.len());
        for (vehicle, r) in self.routes.iter().enumerate() {
            let mut route = Vec::with_capacity(r.len());
            for (position, a) in r.iter().enumerate() {
                let task = by_id.get(&a.task).ok_or(ModelError::UnknownTask {
                    vehicle,
                    position,
                    task: a.task,
                })?;
                route.push(Action {
                    kind: a.action,
                    task: **task,
                });
            }
            routes.push(route);
        }
        Ok(Plan { routes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Capacity,
    Delivery,
    Pairing,
    Precedence,
}

/// A broken core constraint. `position` is the index within the vehicle's route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    /// Load after the action at `position` exceeds the vehicle capacity.
    Capacity {
        vehicle: usize,
        position: usize,
        task: TaskId,
        load: f64,
        capacity: f64,
    },
    /// A won task is never picked up or never delivered, or appears more than once.
    Delivery {
        task: TaskId,
        pickups: usize,
        deliveries: usize,
    },
    /// Pickup and delivery happen on different vehicles.
    Pairing {
        task: TaskId,
        pickup_vehicle: usize,
        delivery_vehicle: usize,
    },
    /// Delivery is scheduled before (or without a preceding) pickup.
    Precedence {
        vehicle: usize,
        position: usize,
        task: TaskId,
    },
}

impl Violation {
    pub fn constraint(&self) -> Constraint {
        match self {
            Violation::Capacity { .. } => Constraint::Capacity,
            Violation::Delivery { .. } => Constraint::Delivery,
            Violation::Pairing { .. } => Constraint::Pairing,
            Violation::Precedence { .. } => Constraint::Precedence,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Capacity {
                vehicle,
                position,
                task,
                load,
                capacity,
            } => write!(
                f,
                "capacity: vehicle {vehicle} position {position} (task {task}) load {load} > {capacity}"
            ),
            Violation::Delivery {
                task,
                pickups,
                deliveries,
            } => write!(
                f,
                "delivery: task {task} picked up {pickups}x and delivered {deliveries}x"
            ),
            Violation::Pairing {
                task,
                pickup_vehicle,
                delivery_vehicle,
            } => write!(
                f,
                "pairing: task {task} picked up by vehicle {pickup_vehicle}, delivered by {delivery_vehicle}"
            ),
            Violation::Precedence {
                vehicle,
                position,
                task,
            } => write!(
                f,
                "precedence: vehicle {vehicle} delivers task {task} at position {position} before picking it up"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn constraints(&self) -> std::collections::BTreeSet<Constraint> {
        self.violations.iter().map(Violation::constraint).collect()
    }
}

/// Checks the four core constraints.
///
/// Returns `Err` only for structural problems (wrong route count, an action
/// naming a task outside `won` or with data that disagrees with it).
pub fn validate_plan(plan: &Plan, won: &[Task], fleet: &Company) -> Result<Verdict, ModelError> {
    if plan.routes.len() != fleet.vehicles.len() {
        return Err(ModelError::RouteCount {
            got: plan.routes.len(),
            expected: fleet.vehicles.len(),
        });
    }
    let known: HashMap<TaskId, &Task> = won.iter().map(|t| (t.id, t)).collect();

    // (vehicle, position) of every pickup / delivery of each won task
    #[derive(Default)]
    struct Seen {
        pickups: Vec<(usize, usize)>,
        deliveries: Vec<(usize, usize)>,
    }
    let mut seen: BTreeMap<TaskId, Seen> = won.iter().map(|t| (t.id, Seen::default())).collect();
    let mut violations = Vec::new();

    for (vi, route) in plan.routes.iter().enumerate() {
        let capacity = fleet.vehicles[vi].capacity;
        let mut carried: Vec<Task> = Vec::new();
        for (pos, action) in route.iter().enumerate() {
            match known.get(&action.task.id) {
                Some(t) if **t == action.task => {}
                _ => {
                    return Err(ModelError::UnknownTask {
                        vehicle: vi,
                        position: pos,
                        task: action.task.id,
                    })
                }
            }
            let entry = seen.get_mut(&action.task.id).expect("known task");
            match action.kind {
                ActionKind::Pickup => {
                    entry.pickups.push((vi, pos));
                    carried.push(action.task);
                    let load: f64 = carried.iter().map(|t| t.weight).sum();
                    if load > capacity + CAPACITY_EPS {
                        violations.push(Violation::Capacity {
                            vehicle: vi,
                            position: pos,
                            task: action.task.id,
                            load,
                            capacity,
                        });
                    }
                }
                ActionKind::Deliver => {
                    entry.deliveries.push((vi, pos));
                    if let Some(i) = carried.iter().position(|t| t.id == action.task.id) {
                        carried.remove(i);
                    }
                }
            }
        }
    }

    for (&task, s) in &seen {
        if s.pickups.len() != 1 || s.deliveries.len() != 1 {
            violations.push(Violation::Delivery {
                task,
                pickups: s.pickups.len(),
                deliveries: s.deliveries.len(),
            });
            continue;
        }
        let (pv, pp) = s.pickups[0];
        let (dv, dp) = s.deliveries[0];
        if pv != dv {
            violations.push(Violation::Pairing {
                task,
                pickup_vehicle: pv,
                delivery_vehicle: dv,
            });
        } else if dp < pp {
            violations.push(Violation::Precedence {
                vehicle: dv,
                position: dp,
                task,
            });
        }
    }
    Ok(Verdict { violations })
}

/// Kilometres driven by one vehicle from `home` through every action city.
pub fn route_km(home: CityId, route: &[Action], dist: &DistanceMatrix) -> f64 {
    let mut km = 0.0;
    let mut at = home;
    for a in route {
        let next = a.city();
        km += dist.get(at, next);
        at = next;
    }
    km
}

/// Sum over vehicles, in fleet order, of route length times cost per km.
pub fn plan_cost(plan: &Plan, fleet: &Company, dist: &DistanceMatrix) -> f64 {
    plan.routes
        .iter()
        .zip(&fleet.vehicles)
        .map(|(route, v)| route_km(v.home, route, dist) * v.cost_per_km)
        .sum()
}

/// Profit is revenue minus transport cost.
pub fn company_profit(revenue: f64, cost: f64) -> f64 {
    revenue - cost
}
