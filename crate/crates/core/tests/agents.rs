mod common;

use std::sync::Arc;

use apdp::agents::{
    builtin, Agent, AgentContext, AgentTuning, AuctionObservation, BidRecord, BidResponse, ExpCostFixedBid, Honest,
    ModelOpponent, Naive, RiskSeeking, BUILTIN_AGENTS,
};
use apdp::model::{validate_plan, Company, Plan, Task};
use apdp::tournament::{default_fleets, run_match, MatchConfig};
use apdp::{TaskDistribution, Topology};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn context(topo: &Arc<Topology>, agent_id: usize, seed: u64, opponent_vehicles: Option<usize>) -> AgentContext {
    let mut r = rng(seed);
    let n = topo.num_cities();
    let vehicles = default_fleets()[agent_id]
        .iter()
        .enumerate()
        .map(|(id, s)| vehicle(id, r.gen_range(0..n), s.capacity, s.cost_per_km))
        .collect();
    AgentContext {
        agent_id,
        topology: topo.clone(),
        distribution: TaskDistribution::new(n, 3.0, 30.0).unwrap(),
        company: Company::new(agent_id, vehicles).unwrap(),
        opponent_vehicles,
        t_bid_ms: 5_000,
        t_plan_ms: 30_000,
        seed,
    }
}

/// Auctions `tasks` against a phantom opponent; the agent wins round k when
/// `wins(k)`. Returns its bids and the tasks each side won.
fn drive<A: Agent>(agent: &mut A, ctx: &AgentContext, tasks: &[Task], wins: impl Fn(usize) -> bool) -> (Vec<Option<f64>>, Vec<Task>, Vec<Task>) {
    let me = ctx.agent_id;
    let other = 1 - me;
    let (mut bids, mut mine, mut theirs) = (vec![], vec![], vec![]);
    for (k, t) in tasks.iter().enumerate() {
        let b = agent.ask_bid(t).unwrap().value();
        bids.push(b);
        let winner = if b.is_some() && wins(k) { me } else { other };
        let price = if winner == me { b.unwrap() } else { 1.0 };
        let mut records = vec![BidRecord { agent: 0, bid: None }, BidRecord { agent: 1, bid: None }];
        records[me].bid = b;
        records[other].bid = Some(1.0);
        agent
            .observe(&AuctionObservation { round: k, task: *t, bids: records, winner: Some(winner), price: Some(price) })
            .unwrap();
        if winner == me { mine.push(*t) } else { theirs.push(*t) }
    }
    (bids, mine, theirs)
}

/// Independent replay of a fleet kept by cheapest insertion.
struct ReplayFleet {
    company: Company,
    plan: Plan,
}

impl ReplayFleet {
    fn new(company: Company) -> Self {
        let plan = Plan::empty(company.vehicles.len());
        Self { company, plan }
    }
    fn marginal(&self, t: &Task, topo: &Topology) -> Option<f64> {
        exhaustive_insertion(t, &self.plan, &self.company, topo.dist()).map(|m| m.3)
    }
    fn add(&mut self, t: &Task, topo: &Topology) {
        if let Some((v, p, d, _)) = exhaustive_insertion(t, &self.plan, &self.company, topo.dist()) {
            self.plan.routes[v].insert(p, apdp::Action::pickup(*t));
            self.plan.routes[v].insert(d, apdp::Action::deliver(*t));
        }
    }
}

fn shadow_company(own: &Company, vehicles: usize) -> Company {
    Company::new(
        usize::MAX,
        (0..vehicles)
            .map(|i| apdp::Vehicle { id: i, ..own.vehicles[i % own.vehicles.len()] })
            .collect(),
    )
    .unwrap()
}

fn setup_tasks(seed: u64, topo: &Topology, n: usize) -> Vec<Task> {
    random_tasks(&mut rng(seed ^ 0xabc), n, topo.num_cities(), (3.0, 30.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn honest_bids_its_replayed_marginal(seed in any::<u64>(), slot in 0usize..2) {
        let topo = Arc::new(Topology::bundled("switzerland").unwrap());
        let ctx = context(&topo, slot, seed, Some(2));
        let tasks = setup_tasks(seed, &topo, 20);
        let mut a = Honest::new(AgentTuning::default());
        a.setup(&ctx).unwrap();
        let (bids, mine, _) = drive(&mut a, &ctx, &tasks, |k| k % 3 != 1);
        let mut oracle = ReplayFleet::new(ctx.company.clone());
        for (k, t) in tasks.iter().enumerate() {
            let m = oracle.marginal(t, &topo).map(|m| m.max(0.0));
            match (bids[k], m) {
                (Some(b), Some(m)) => prop_assert!((b - m).abs() <= 1e-9, "round {}: {} vs {}", k, b, m),
                (b, m) => prop_assert_eq!(b, m),
            }
            if mine.iter().any(|w| w.id == t.id) {
                oracle.add(t, &topo);
            }
        }
        let plan = a.final_plan(&mine).unwrap();
        prop_assert!(validate_plan(&plan, &mine, &ctx.company).unwrap().is_ok());
        prop_assert!(cost_of(&plan, &ctx.company, topo.dist()) <= cost_of(&oracle.plan, &ctx.company, topo.dist()) + 1e-9);
    }

    #[test]
    fn model_opponent_bids_the_larger_replayed_marginal(seed in any::<u64>(), reveal in any::<bool>()) {
        let topo = Arc::new(Topology::bundled("france").unwrap());
        let ctx = context(&topo, 0, seed, reveal.then_some(3));
        let tasks = setup_tasks(seed, &topo, 20);
        let mut a = ModelOpponent::new(AgentTuning::default());
        a.setup(&ctx).unwrap();
        let (bids, mine, _) = drive(&mut a, &ctx, &tasks, |k| k % 2 == 0);
        let mut own = ReplayFleet::new(ctx.company.clone());
        let mut shadow = ReplayFleet::new(shadow_company(&ctx.company, if reveal { 3 } else { 2 }));
        for (k, t) in tasks.iter().enumerate() {
            let want = match (own.marginal(t, &topo), shadow.marginal(t, &topo)) {
                (None, _) => None,
                (Some(o), None) => Some(o.max(0.0)),
                (Some(o), Some(s)) => Some(o.max(s).max(0.0)),
            };
            match (bids[k], want) {
                (Some(b), Some(w)) => prop_assert!((b - w).abs() <= 1e-9, "round {}: {} vs {}", k, b, w),
                (b, w) => prop_assert_eq!(b, w),
            }
            if mine.iter().any(|w| w.id == t.id) { own.add(t, &topo) } else { shadow.add(t, &topo) }
        }
    }

    #[test]
    fn risk_seeking_stays_within_prior_weight_of_marginals(seed in any::<u64>(), gamma in 0.5f64..0.99) {
        let topo = Arc::new(Topology::bundled("netherlands").unwrap());
        let ctx = context(&topo, 1, seed, Some(2));
        let tasks = setup_tasks(seed, &topo, 25);
        let tuning = AgentTuning { risk_gamma: gamma, ..AgentTuning::default() };
        let mut a = RiskSeeking::new(tuning);
        a.setup(&ctx).unwrap();
        let prior = a.prior().unwrap().mean;
        let (bids, mine, _) = drive(&mut a, &ctx, &tasks, |k| k % 2 == 1);
        let mut own = ReplayFleet::new(ctx.company.clone());
        let mut shadow = ReplayFleet::new(shadow_company(&ctx.company, 2));
        for (k, t) in tasks.iter().enumerate() {
            let alpha = gamma.powi(k as i32);
            if let (Some(b), Some(o), Some(s)) = (bids[k], own.marginal(t, &topo), shadow.marginal(t, &topo)) {
                let m = o.max(s);
                let bound = alpha * (prior - o).abs().max((prior - s).abs());
                prop_assert!((b - m.max(0.0)).abs() <= bound + 1e-9, "round {}: bid {} marginal {} bound {}", k, b, m, bound);
                if k == 0 {
                    // identical fleets, empty plans: the prior alone
                    prop_assert!((b - prior.max(0.0)).abs() <= 1e-9);
                }
            }
            if mine.iter().any(|w| w.id == t.id) { own.add(t, &topo) } else { shadow.add(t, &topo) }
        }
    }

    #[test]
    fn naive_bids_the_noisy_direct_trip(seed in any::<u64>()) {
        let topo = Arc::new(Topology::bundled("great_britain").unwrap());
        let ctx = context(&topo, 0, seed, None);
        let tasks = setup_tasks(seed, &topo, 20);
        let mut a = Naive::new(AgentTuning::default());
        a.setup(&ctx).unwrap();
        let (bids, mine, _) = drive(&mut a, &ctx, &tasks, |k| k % 4 == 0);
        let v = ctx.company.vehicles[0];
        let mut at = v.home;
        for (k, t) in tasks.iter().enumerate() {
            if t.weight > v.capacity {
                prop_assert_eq!(bids[k], None);
                continue;
            }
            let base = (topo.distance(at, t.pickup) + topo.distance(t.pickup, t.delivery)) * v.cost_per_km;
            let b = bids[k].unwrap();
            prop_assert!(b >= base - 1e-9 && b <= base * 1.05 + 1e-9);
            if mine.iter().any(|w| w.id == t.id) {
                at = t.delivery;
            }
        }
        let plan = a.final_plan(&mine).unwrap();
        prop_assert!(plan.routes[1].is_empty());
        prop_assert!(validate_plan(&plan, &mine, &ctx.company).unwrap().is_ok());
    }

    #[test]
    fn fixed_bidder_bids_its_prior_mean(seed in any::<u64>()) {
        let topo = Arc::new(Topology::bundled("switzerland").unwrap());
        let ctx = context(&topo, 0, seed, Some(2));
        let mut a = ExpCostFixedBid::new(AgentTuning::default());
        a.setup(&ctx).unwrap();
        let prior = a.prior().unwrap().clone();
        // the mean of the direct single-task costs, recomputed here
        let direct: Vec<f64> = prior
            .tasks
            .iter()
            .filter_map(|t| {
                ctx.company
                    .vehicles
                    .iter()
                    .filter(|v| v.capacity >= t.weight)
                    .map(|v| (topo.distance(v.home, t.pickup) + topo.distance(t.pickup, t.delivery)) * v.cost_per_km)
                    .reduce(f64::min)
            })
            .collect();
        let mean = direct.iter().sum::<f64>() / direct.len() as f64;
        prop_assert!((prior.mean - mean).abs() < 1e-9);
        let tasks = setup_tasks(seed, &topo, 10);
        let (bids, ..) = drive(&mut a, &ctx, &tasks, |_| true);
        prop_assert!(bids.iter().all(|b| *b == Some(prior.mean)));
    }
}

#[test]
fn bids_do_not_depend_on_the_task_count() {
    // agents never learn how many tasks remain: the first rounds of a short
    // match are identical to those of a long one
    let topo = Arc::new(Topology::bundled("france").unwrap());
    for name in BUILTIN_AGENTS {
        let play = |tasks| {
            let config = MatchConfig { tasks, ..MatchConfig::default() };
            let mut agents = [builtin(name).unwrap(), builtin("ModelOpponent").unwrap()];
            run_match(&mut agents, &topo, &config, 21).unwrap()
        };
        let short = play(8);
        let long = play(40);
        assert_eq!(short.ledger.rounds[..], long.ledger.rounds[..8], "{name}");
    }
}

#[test]
fn every_baseline_delivers_a_valid_plan() {
    let topologies: Vec<Arc<Topology>> = apdp::topology::BUNDLED_TOPOLOGIES
        .iter()
        .map(|n| Arc::new(Topology::bundled(n).unwrap()))
        .collect();
    let config = MatchConfig { tasks: 25, ..MatchConfig::default() };
    for (i, a) in BUILTIN_AGENTS.iter().enumerate() {
        for (j, b) in BUILTIN_AGENTS.iter().enumerate() {
            let mut agents = [builtin(a).unwrap(), builtin(b).unwrap()];
            let run = run_match(&mut agents, &topologies[(i + j) % 4], &config, (i * 5 + j) as u64).unwrap();
            for o in &run.result.agents {
                assert_eq!(o.forfeit, None, "{a} vs {b}: {:?}", o.detail);
            }
        }
    }
}

#[test]
fn agents_refuse_to_work_before_setup() {
    for name in BUILTIN_AGENTS {
        let mut a = builtin(name).unwrap();
        assert!(a.ask_bid(&task(0, 0, 1, 5.0)).is_err(), "{name}");
        assert!(a.final_plan(&[]).is_err(), "{name}");
    }
    assert!(matches!(builtin("abstainer").unwrap().ask_bid(&task(0, 0, 1, 5.0)), Ok(BidResponse::Abstain)));
}
