use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use apdp::agents::{builtin_with, AgentTuning};
use apdp::interface::{replay, serve, AgentSpec, MatchRecord, PlanInstance, RunConfig, ServeOptions};
use apdp::model::{plan_cost, validate_plan, Plan, PlanDoc, TaskSampler};
use apdp::planning::{astar_optimal, bfs_optimal, sls_optimize, Deadline, Heuristic, SlsConfig};
use apdp::rng::stream;
use apdp::topology::Topology;
use apdp::tournament::{aggregate, pair_seed, run_match, run_series, write_csv, MatchConfig};
use apdp::TaskDistribution;

#[derive(Parser)]
#[command(name = "apdp", version, about = "Auction, pickup and delivery tournaments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Play one pair of matches (companies swapped) and print both results.
    Match(MatchArgs),
    /// Run the double all-play-all schedule and write the summary table.
    Tournament(TournamentArgs),
    /// Solve a static instance and print the plan and its cost.
    Plan(PlanArgs),
    /// Check a plan document against an instance.
    Validate(ValidateArgs),
    /// Re-derive matches from their records and compare.
    Replay(ReplayArgs),
    /// Print a seeded task stream, one JSON task per line.
    SampleTasks(SampleArgs),
    /// Serve a built-in agent over the line protocol on stdin/stdout.
    #[command(hide = true)]
    AgentServe(ServeArgs),
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration document; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    t_bid_ms: Option<u64>,
    #[arg(long)]
    t_plan_ms: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.tasks {
            c.tasks = t;
        }
        if let Some(t) = self.t_bid_ms {
            c.t_bid_ms = t;
        }
        if let Some(t) = self.t_plan_ms {
            c.t_plan_ms = t;
        }
        Ok(c)
    }
}

#[derive(clap::Args)]
struct MatchArgs {
    /// The two agents: built-in names.
    #[arg(num_args = 2, required = true)]
    agents: Vec<String>,
    #[command(flatten)]
    common: Common,
    /// Topology name or path (default: first of the configuration).
    #[arg(long)]
    topology: Option<String>,
    /// Append both match records here.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Write the per-round auction log of both matches here.
    #[arg(long)]
    rounds: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TournamentArgs {
    #[command(flatten)]
    common: Common,
    /// Roster of built-in names (default: the configuration's roster).
    #[arg(long, num_args = 2..)]
    agents: Option<Vec<String>>,
    /// Topologies (default: the configuration's list).
    #[arg(long, num_args = 1..)]
    topologies: Option<Vec<String>>,
    #[arg(long)]
    per_topology: Option<usize>,
    /// Directory for table.csv and matches.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Sls,
    Astar,
    Ucs,
    Bfs,
}

#[derive(clap::Args)]
struct PlanArgs {
    /// Instance document; without it a random instance is generated.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value = "switzerland")]
    topology: String,
    #[arg(long, default_value_t = 5)]
    random_tasks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "sls")]
    algorithm: Algorithm,
    /// Local search iteration budget.
    #[arg(long, default_value_t = 20_000)]
    iterations: u64,
    /// Local search wall-clock budget.
    #[arg(long, default_value_t = 10_000)]
    time_ms: u64,
    /// Vehicle used by the single-vehicle searches.
    #[arg(long, default_value_t = 0)]
    vehicle: usize,
    /// Also write the instance used.
    #[arg(long)]
    save_instance: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    plan: PathBuf,
}

#[derive(clap::Args)]
struct ReplayArgs {
    /// Line-delimited match records.
    records: PathBuf,
    /// Only replay the record at this 0-based line.
    #[arg(long)]
    index: Option<usize>,
}

#[derive(clap::Args)]
struct SampleArgs {
    #[arg(long, default_value = "switzerland")]
    topology: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 3.0)]
    weight_min: f64,
    #[arg(long, default_value_t = 30.0)]
    weight_max: f64,
}

#[derive(clap::Args)]
struct ServeArgs {
    name: String,
    #[arg(long, default_value_t = 0)]
    bid_delay_ms: u64,
    /// Tuning document for the agent.
    #[arg(long)]
    tuning: Option<String>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        // a closed reader (`| head`) is not an error
        Err(e) if e.chain().any(|c| c.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::Match(a) => cmd_match(a),
        Cmd::Tournament(a) => cmd_tournament(a),
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Replay(a) => cmd_replay(a),
        Cmd::SampleTasks(a) => cmd_sample(a),
        Cmd::AgentServe(a) => cmd_serve(a),
    }
}

fn builtin_specs(names: &[String]) -> Vec<AgentSpec> {
    names.iter().map(|n| AgentSpec::Builtin(n.clone())).collect()
}

fn cmd_match(a: MatchArgs) -> Result<ExitCode> {
    let mut cfg = a.common.load()?;
    let specs = builtin_specs(&a.agents);
    if let Some(t) = &a.topology {
        cfg.topologies = vec![t.clone()];
    }
    cfg.check()?;
    let topology = cfg.load_topologies()?.into_iter().next().context("no topology configured")?;
    let mc = cfg.match_config();
    let seed = pair_seed(cfg.seed, 0, 0);
    let mut record_out = a.record.as_ref().map(File::create).transpose()?.map(BufWriter::new);
    let mut rounds_out = a.rounds.as_ref().map(File::create).transpose()?.map(BufWriter::new);
    let entrants = specs.iter().map(|s| s.entrant(cfg.tuning)).collect::<Result<Vec<_>, _>>()?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for order in [[0usize, 1], [1, 0]] {
        let mut agents = [entrants[order[0]].spawn(), entrants[order[1]].spawn()];
        let run = run_match(&mut agents, &topology, &mc, seed)?;
        let slots = vec![specs[order[0]].clone(), specs[order[1]].clone()];
        if let Some(w) = record_out.as_mut() {
            MatchRecord::from_run(&run, &topology, &mc, slots, None, None).write_line(w)?;
        }
        if let Some(w) = rounds_out.as_mut() {
            for r in &run.ledger.rounds {
                writeln!(w, "{}", serde_json::to_string(r)?)?;
            }
        }
        writeln!(out, "{}", serde_json::to_string(&run.result)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_tournament(a: TournamentArgs) -> Result<ExitCode> {
    let mut cfg = a.common.load()?;
    if let Some(names) = &a.agents {
        cfg.agents = builtin_specs(names);
    }
    if let Some(t) = a.topologies {
        cfg.topologies = t;
    }
    if let Some(n) = a.per_topology {
        cfg.tournaments_per_topology = n;
    }
    if let Some(o) = a.out {
        cfg.output_dir = Some(o);
    }
    cfg.check()?;
    let topologies = cfg.load_topologies()?;
    let entrants = cfg.entrants()?;
    let mc = cfg.match_config();
    let runs = run_series(&entrants, &topologies, cfg.tournaments_per_topology, &mc, cfg.seed)?;
    let tables: Vec<_> = runs.iter().map(|r| r.table.clone()).collect();
    let rows = aggregate(&tables);
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_csv(&rows, File::create(dir.join("table.csv"))?)?;
        let mut w = BufWriter::new(File::create(dir.join("matches.jsonl"))?);
        for (run, topology) in runs.iter().zip(topologies.iter().flat_map(|t| {
            std::iter::repeat_n(t, cfg.tournaments_per_topology)
        })) {
            for m in &run.matches {
                let specs = m.fixture.slots.iter().map(|&i| cfg.agents[i].clone()).collect();
                MatchRecord::from_run(&m.run, topology, &mc, specs, Some(m.tournament), Some(m.fixture))
                    .write_line(&mut w)?;
            }
        }
        w.flush()?;
    }
    write_csv(&rows, io::stdout().lock())?;
    Ok(ExitCode::SUCCESS)
}

fn load_instance(path: &PathBuf) -> Result<(PlanInstance, Topology)> {
    let inst = PlanInstance::from_path(path)?;
    let topology = Topology::resolve(&inst.topology)?;
    Ok((inst, topology))
}

fn cmd_plan(a: PlanArgs) -> Result<ExitCode> {
    let (inst, topology) = match &a.instance {
        Some(p) => load_instance(p)?,
        None => {
            let topology = Topology::resolve(&a.topology)?;
            let fleet: Vec<(f64, f64)> = MatchConfig::default().fleets[0]
                .iter()
                .map(|v| (v.capacity, v.cost_per_km))
                .collect();
            let inst = PlanInstance::random(&a.topology, &topology, &fleet, a.random_tasks, (3.0, 30.0), a.seed)?;
            (inst, topology)
        }
    };
    if let Some(p) = &a.save_instance {
        fs::write(p, serde_json::to_string_pretty(&inst)?)?;
    }
    let company = inst.company(&topology)?;
    let dist = topology.dist();
    let plan = match a.algorithm {
        Algorithm::Sls => {
            let deadline = Deadline::after(Duration::from_millis(a.time_ms)).with_iterations(a.iterations);
            let mut rng = stream(a.seed, apdp::rng::streams::AGENT_BASE);
            sls_optimize(&inst.tasks, &company, dist, deadline, &mut rng, SlsConfig::default())?.plan
        }
        Algorithm::Astar | Algorithm::Ucs | Algorithm::Bfs => {
            let vehicle = company
                .vehicles
                .get(a.vehicle)
                .with_context(|| format!("no vehicle {}", a.vehicle))?;
            let out = match a.algorithm {
                Algorithm::Astar => astar_optimal(&inst.tasks, vehicle, dist, Heuristic::Mst)?,
                Algorithm::Ucs => astar_optimal(&inst.tasks, vehicle, dist, Heuristic::Zero)?,
                _ => bfs_optimal(&inst.tasks, vehicle, dist)?,
            };
            let mut plan = Plan::empty(company.vehicles.len());
            plan.routes[a.vehicle] = out.route;
            plan
        }
    };
    let cost = plan_cost(&plan, &company, dist);
    let doc = serde_json::json!({ "cost": cost, "plan": plan.to_doc() });
    writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&doc)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(a: ValidateArgs) -> Result<ExitCode> {
    let (inst, topology) = load_instance(&a.instance)?;
    let company = inst.company(&topology)?;
    let text = fs::read_to_string(&a.plan).with_context(|| format!("reading {}", a.plan.display()))?;
    let doc: PlanDoc = match serde_json::from_str::<serde_json::Value>(&text)? {
        serde_json::Value::Object(mut m) if m.contains_key("plan") => serde_json::from_value(m.remove("plan").unwrap())?,
        v => serde_json::from_value(v)?,
    };
    let plan = doc.resolve(&inst.tasks)?;
    let verdict = validate_plan(&plan, &inst.tasks, &company)?;
    let cost = plan_cost(&plan, &company, topology.dist());
    let report = serde_json::json!({ "ok": verdict.is_ok(), "cost": cost, "violations": verdict.violations });
    writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(if verdict.is_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_replay(a: ReplayArgs) -> Result<ExitCode> {
    let file = File::open(&a.records).with_context(|| format!("opening {}", a.records.display()))?;
    let records = MatchRecord::read_all(BufReader::new(file))?;
    if records.is_empty() {
        bail!("{} holds no records", a.records.display());
    }
    let mut failed = 0;
    for (i, r) in records.iter().enumerate() {
        if a.index.is_some_and(|k| k != i) {
            continue;
        }
        let report = replay(r)?;
        if report.is_ok() {
            writeln!(io::stdout(), "record {i}: ok")?;
        } else {
            failed += 1;
            writeln!(io::stdout(), "record {i}: MISMATCH")?;
            for m in report.audit.iter().chain(&report.rerun) {
                writeln!(io::stdout(), "  {m}")?;
            }
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_sample(a: SampleArgs) -> Result<ExitCode> {
    let topology = Topology::resolve(&a.topology)?;
    let dist = TaskDistribution::new(topology.num_cities(), a.weight_min, a.weight_max)?;
    let rng = stream(a.seed, apdp::rng::streams::TASKS);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for task in TaskSampler::new(dist, rng).take(a.count) {
        writeln!(out, "{}", serde_json::to_string(&task)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(a: ServeArgs) -> Result<ExitCode> {
    let tuning: AgentTuning = match &a.tuning {
        Some(t) => serde_json::from_str(t)?,
        None => AgentTuning::default(),
    };
    let mut agent = builtin_with(&a.name, tuning).with_context(|| format!("unknown agent {:?}", a.name))?;
    let options = ServeOptions {
        bid_delay: Duration::from_millis(a.bid_delay_ms),
    };
    serve(&mut agent, io::stdin().lock(), io::stdout().lock(), options)?;
    Ok(ExitCode::SUCCESS)
}
