//! Bookkeeping shared by the baselines: an insertion-maintained tentative
//! plan, the shadow fleet used to guess an opponent's marginal cost, and the
//! synthetic-task prior.

use rand::Rng;

use crate::model::{plan_cost, sample_task, validate_plan, Company, Plan, Task, TaskDistribution, Vehicle};
use crate::planning::{cheapest_insertion, InsertionResult};
use crate::topology::DistanceMatrix;

/// Won tasks plus a plan built by cheapest insertion in win order.
#[derive(Debug, Clone)]
pub struct FleetState {
    pub company: Company,
    pub won: Vec<Task>,
    pub plan: Plan,
    pending: Option<(u32, InsertionResult)>,
}

impl FleetState {
    pub fn new(company: Company) -> Self {
        let plan = Plan::empty(company.vehicles.len());
        Self {
            company,
            won: Vec::new(),
            plan,
            pending: None,
        }
    }

    /// Cheapest insertion of `task` into the current plan. The result is
    /// remembered so a later [`FleetState::commit`] reuses it.
    pub fn marginal(&mut self, task: &Task, dist: &DistanceMatrix) -> Option<f64> {
        if let Some((id, r)) = &self.pending {
            if *id == task.id {
                return Some(r.marginal_cost);
            }
        }
        let r = cheapest_insertion(task, &self.plan, &self.company, dist)?;
        let m = r.marginal_cost;
        self.pending = Some((task.id, r));
        Some(m)
    }

    /// Adds a won task. Returns `false` (and changes nothing) if it cannot be
    /// inserted anywhere.
    pub fn commit(&mut self, task: &Task, dist: &DistanceMatrix) -> bool {
        let r = match self.pending.take() {
            Some((id, r)) if id == task.id => r,
            _ => match cheapest_insertion(task, &self.plan, &self.company, dist) {
                Some(r) => r,
                None => return false,
            },
        };
        self.plan = r.plan;
        self.won.push(*task);
        true
    }

    pub fn cost(&self, dist: &DistanceMatrix) -> f64 {
        plan_cost(&self.plan, &self.company, dist)
    }

    /// The tentative plan if it serves exactly `won`.
    pub fn plan_for(&self, won: &[Task]) -> Option<&Plan> {
        let mut a: Vec<_> = self.won.iter().map(|t| t.id).collect();
        let mut b: Vec<_> = won.iter().map(|t| t.id).collect();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return None;
        }
        validate_plan(&self.plan, won, &self.company)
            .ok()
            .filter(|v| v.is_ok())
            .map(|_| &self.plan)
    }
}

/// Proxy for the opponents: their won tasks, served by a fleet cloned from
/// our own vehicle specs (homes included).
#[derive(Debug, Clone)]
pub struct OpponentModel {
    pub shadow: FleetState,
    /// Tasks opponents won that the shadow fleet could not absorb.
    pub untracked: Vec<Task>,
}

impl OpponentModel {
    pub fn new(own: &Company, opponent_vehicles: Option<usize>) -> Self {
        let n = opponent_vehicles.unwrap_or(own.vehicles.len()).max(1);
        let vehicles = (0..n)
            .map(|i| Vehicle {
                id: i,
                ..own.vehicles[i % own.vehicles.len()]
            })
            .collect();
        Self {
            shadow: FleetState::new(Company {
                id: usize::MAX,
                vehicles,
            }),
            untracked: Vec::new(),
        }
    }

    pub fn marginal(&mut self, task: &Task, dist: &DistanceMatrix) -> Option<f64> {
        self.shadow.marginal(task, dist)
    }

    pub fn opponent_won(&mut self, task: &Task, dist: &DistanceMatrix) {
        if !self.shadow.commit(task, dist) {
            self.untracked.push(*task);
        }
    }
}

/// Mean marginal cost of synthetic tasks inserted into an empty fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPrior {
    pub tasks: Vec<Task>,
    /// Marginal cost per synthetic task; `None` if no vehicle can carry it.
    pub marginals: Vec<Option<f64>>,
    pub mean: f64,
}

impl SyntheticPrior {
    pub fn sample<R: Rng + ?Sized>(
        count: usize,
        distribution: &TaskDistribution,
        company: &Company,
        dist: &DistanceMatrix,
        rng: &mut R,
    ) -> Self {
        let empty = Plan::empty(company.vehicles.len());
        let tasks: Vec<Task> = (0..count)
            .map(|i| sample_task(distribution, u32::MAX - i as u32, rng))
            .collect();
        let marginals: Vec<Option<f64>> = tasks
            .iter()
            .map(|t| cheapest_insertion(t, &empty, company, dist).map(|r| r.marginal_cost))
            .collect();
        let feasible: Vec<f64> = marginals.iter().flatten().copied().collect();
        let mean = if feasible.is_empty() {
            0.0
        } else {
            feasible.iter().sum::<f64>() / feasible.len() as f64
        };
        Self { tasks, marginals, mean }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vehicle;

    fn line() -> DistanceMatrix {
        let xs = [0.0f64, 2.0, 5.0, 9.0];
        DistanceMatrix::from_rows(xs.iter().map(|a| xs.iter().map(|b| (a - b).abs()).collect()).collect())
    }

    fn company() -> Company {
        Company::new(
            0,
            vec![
                Vehicle {
                    id: 0,
                    home: 0,
                    capacity: 10.0,
                    cost_per_km: 1.0,
                },
                Vehicle {
                    id: 1,
                    home: 3,
                    capacity: 20.0,
                    cost_per_km: 2.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn commit_changes_cost_by_marginal() {
        let d = line();
        let mut s = FleetState::new(company());
        for (i, (p, q)) in [(1, 2), (3, 0), (2, 3), (0, 1)].into_iter().enumerate() {
            let t = Task::new(i as u32, p, q, 4.0).unwrap();
            let before = s.cost(&d);
            let m = s.marginal(&t, &d).unwrap();
            assert!(s.commit(&t, &d));
            assert!((s.cost(&d) - before - m).abs() < 1e-9);
        }
        assert!(s.plan_for(&s.won.clone()).is_some());
        assert!(s.plan_for(&[]).is_none());
    }

    #[test]
    fn shadow_copies_own_specs() {
        let m = OpponentModel::new(&company(), Some(3));
        assert_eq!(m.shadow.company.vehicles.len(), 3);
        assert_eq!(m.shadow.company.vehicles[2].home, 0);
        assert_eq!(m.shadow.company.vehicles[2].id, 2);
    }
}
