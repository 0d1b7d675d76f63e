//! Cheapest insertion of a single task into an existing plan, keeping the
//! order of the actions already scheduled.

use crate::model::{plan_cost, Action, Company, Plan, Task, CAPACITY_EPS};
use crate::topology::{CityId, DistanceMatrix};

/// Two candidate costs closer than this are treated as equal; the earlier
/// candidate in (vehicle, pickup, delivery) order is kept.
pub const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InsertionResult {
    pub vehicle: usize,
    /// Index of the new pickup in the vehicle's updated route.
    pub pickup_position: usize,
    /// Index of the new delivery in the vehicle's updated route.
    pub delivery_position: usize,
    pub marginal_cost: f64,
    pub plan: Plan,
}

/// Best slot for `task` in one route: `(pickup_position, delivery_position, delta_km)`.
///
/// Positions index the updated route. `exclude` skips one slot, which lets
/// local search ask for the best *different* position of a task it just removed.
pub(crate) fn best_slot(
    task: &Task,
    home: CityId,
    route: &[Action],
    capacity: f64,
    dist: &DistanceMatrix,
    exclude: Option<(usize, usize)>,
) -> Option<(usize, usize, f64)> {
    let w = task.weight;
    if w > capacity + CAPACITY_EPS {
        return None;
    }
    let len = route.len();
    // cities[k]: where the vehicle stands after k actions
    let mut cities = Vec::with_capacity(len + 1);
    cities.push(home);
    cities.extend(route.iter().map(Action::city));
    // load[k]: load after k actions
    let mut load = Vec::with_capacity(len + 1);
    load.push(0.0f64);
    let mut carried: Vec<(u32, f64)> = Vec::new();
    for a in route {
        match a.kind {
            crate::model::ActionKind::Pickup => carried.push((a.task.id, a.task.weight)),
            crate::model::ActionKind::Deliver => {
                if let Some(i) = carried.iter().position(|&(id, _)| id == a.task.id) {
                    carried.remove(i);
                }
            }
        }
        load.push(carried.iter().map(|&(_, w)| w).sum());
    }

    let (pc, dc) = (task.pickup, task.delivery);
    let leg = |a: CityId, b: CityId| dist.get(a, b);
    let mut best: Option<(usize, usize, f64)> = None;
    for p in 0..=len {
        if load[p] + w > capacity + CAPACITY_EPS {
            continue;
        }
        // detour for the pickup alone when the delivery goes somewhere later
        let pick_detour = if p < len {
            leg(cities[p], pc) + leg(pc, cities[p + 1]) - leg(cities[p], cities[p + 1])
        } else {
            0.0
        };
        for q in p..=len {
            // q: number of original actions performed before the delivery
            if q > p && load[q] + w > capacity + CAPACITY_EPS {
                break;
            }
            let slot = (p, q + 1);
            if exclude == Some(slot) {
                continue;
            }
            let delta = if q == p {
                let tail = if p < len {
                    leg(dc, cities[p + 1]) - leg(cities[p], cities[p + 1])
                } else {
                    0.0
                };
                leg(cities[p], pc) + leg(pc, dc) + tail
            } else {
                let tail = if q < len {
                    leg(dc, cities[q + 1]) - leg(cities[q], cities[q + 1])
                } else {
                    0.0
                };
                pick_detour + leg(cities[q], dc) + tail
            };
            match best {
                Some((_, _, b)) if delta >= b - TIE_EPS => {}
                _ => best = Some((slot.0, slot.1, delta)),
            }
        }
    }
    best
}

pub(crate) fn insert_at(route: &mut Vec<Action>, task: Task, pickup_position: usize, delivery_position: usize) {
    route.insert(pickup_position, Action::pickup(task));
    route.insert(delivery_position, Action::deliver(task));
}

/// Minimum-cost insertion of `task` over every vehicle and every ordered pair
/// of positions. Returns `None` when no vehicle can carry the task in any slot.
pub fn cheapest_insertion(
    task: &Task,
    plan: &Plan,
    fleet: &Company,
    dist: &DistanceMatrix,
) -> Option<InsertionResult> {
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for (vi, (route, v)) in plan.routes.iter().zip(&fleet.vehicles).enumerate() {
        if let Some((p, d, km)) = best_slot(task, v.home, route, v.capacity, dist, None) {
            let cost = km * v.cost_per_km;
            match best {
                Some((.., b)) if cost >= b - TIE_EPS => {}
                _ => best = Some((vi, p, d, cost)),
            }
        }
    }
    let (vehicle, p, d, marginal_cost) = best?;
    let mut plan = plan.clone();
    insert_at(&mut plan.routes[vehicle], *task, p, d);
    Some(InsertionResult {
        vehicle,
        pickup_position: p,
        delivery_position: d,
        marginal_cost,
        plan,
    })
}

/// Marginal cost recomputed from whole-plan costs; used to cross-check the
/// incremental formula.
pub fn marginal_by_recost(before: &Plan, after: &Plan, fleet: &Company, dist: &DistanceMatrix) -> f64 {
    plan_cost(after, fleet, dist) - plan_cost(before, fleet, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_plan, Vehicle};

    fn line() -> DistanceMatrix {
        let xs = [0.0f64, 2.0, 5.0, 9.0];
        DistanceMatrix::from_rows(xs.iter().map(|a| xs.iter().map(|b| (a - b).abs()).collect()).collect())
    }

    fn fleet(v: &[(CityId, f64, f64)]) -> Company {
        Company::new(
            0,
            v.iter()
                .enumerate()
                .map(|(id, &(home, capacity, cost_per_km))| Vehicle {
                    id,
                    home,
                    capacity,
                    cost_per_km,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_plan_direct_cost() {
        let f = fleet(&[(0, 10.0, 3.0)]);
        let t = Task::new(0, 1, 2, 1.0).unwrap();
        let r = cheapest_insertion(&t, &Plan::empty(1), &f, &line()).unwrap();
        assert_eq!(r.marginal_cost, (2.0 + 3.0) * 3.0);
        assert_eq!((r.vehicle, r.pickup_position, r.delivery_position), (0, 0, 1));
    }

    #[test]
    fn too_heavy_is_infeasible() {
        let f = fleet(&[(0, 10.0, 1.0), (1, 12.0, 1.0)]);
        let t = Task::new(0, 1, 2, 13.0).unwrap();
        assert!(cheapest_insertion(&t, &Plan::empty(2), &f, &line()).is_none());
    }

    #[test]
    fn zero_detour_on_existing_route() {
        let f = fleet(&[(0, 10.0, 1.0)]);
        let a = Task::new(0, 1, 3, 1.0).unwrap();
        let plan = Plan::sequential(1, 0, &[a]);
        // 2 -> 3 lies on the way from 1 to 3 along the line
        let b = Task::new(1, 1, 3, 1.0).unwrap();
        let r = cheapest_insertion(&b, &plan, &f, &line()).unwrap();
        assert_eq!(r.marginal_cost, 0.0);
        assert!(validate_plan(&r.plan, &[a, b], &f).unwrap().is_ok());
    }

    #[test]
    fn respects_capacity_between_pickup_and_delivery() {
        let f = fleet(&[(0, 10.0, 1.0)]);
        let a = Task::new(0, 1, 3, 8.0).unwrap();
        let plan = Plan::sequential(1, 0, &[a]);
        let b = Task::new(1, 1, 2, 5.0).unwrap();
        let r = cheapest_insertion(&b, &plan, &f, &line()).unwrap();
        assert!(validate_plan(&r.plan, &[a, b], &f).unwrap().is_ok());
        let rc = marginal_by_recost(&plan, &r.plan, &f, &line());
        assert!((rc - r.marginal_cost).abs() < 1e-9);
    }

    #[test]
    fn exclude_skips_identity_slot() {
        let t = Task::new(0, 1, 2, 1.0).unwrap();
        let best = best_slot(&t, 0, &[], 10.0, &line(), None).unwrap();
        assert_eq!((best.0, best.1), (0, 1));
        assert!(best_slot(&t, 0, &[], 10.0, &line(), Some((0, 1))).is_none());
    }
}
