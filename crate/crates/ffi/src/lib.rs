//! C ABI over the simulation core.
//!
//! Conventions:
//! - every fallible function returns an [`ApdpStatus`]; on failure a message
//!   is available from [`apdp_last_error_message`] on the same thread;
//! - structured inputs and outputs are UTF-8 JSON strings;
//! - strings returned through `out_json` are owned by the caller and must be
//!   released with [`apdp_string_free`];
//! - topology handles come from `apdp_topology_*` constructors and must be
//!   released with [`apdp_topology_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use apdp::agents::canonical_name;
use apdp::interface::RunConfig;
use apdp::model::{plan_cost, validate_plan, Company, PlanDoc, Task, Vehicle};
use apdp::planning::{astar_optimal, bfs_optimal, sls_optimize, Deadline, Heuristic, PlanningError, SlsConfig};
use apdp::rng::{stream, streams};
use apdp::tournament::{run_match, Entrant};
use apdp::{Plan, Topology};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApdpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Malformed = 3,
    NotFound = 4,
    Infeasible = 5,
    InvalidArgument = 6,
    Internal = 7,
}

/// Which planner [`apdp_solve`] runs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApdpAlgorithm {
    /// Whole fleet, stochastic local search.
    Sls = 0,
    /// First vehicle only, A* with the spanning-tree bound.
    Astar = 1,
    /// First vehicle only, uniform-cost search.
    Ucs = 2,
    /// First vehicle only, exhaustive layered search.
    Bfs = 3,
}

/// Opaque handle to a loaded road network.
pub struct ApdpTopology {
    inner: Arc<Topology>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ApdpStatus, String);

impl Failure {
    fn new(status: ApdpStatus, msg: impl std::fmt::Display) -> Self {
        Self(status, msg.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ApdpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ApdpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ApdpStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(ApdpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(ApdpStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn topology<'a>(t: *const ApdpTopology) -> Result<&'a Arc<Topology>, Failure> {
    t.as_ref()
        .map(|t| &t.inner)
        .ok_or_else(|| Failure::new(ApdpStatus::NullArgument, "topology handle is null"))
}

unsafe fn write_json(out: *mut *mut c_char, value: &serde_json::Value) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(ApdpStatus::NullArgument, "output pointer is null"));
    }
    let s = serde_json::to_string(value).map_err(|e| Failure::new(ApdpStatus::Internal, e))?;
    *out = CString::new(s).expect("JSON has no nul bytes").into_raw();
    Ok(())
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(json).map_err(|e| Failure::new(ApdpStatus::Malformed, format!("{what}: {e}")))
}

/// Fleet and tasks of a static instance.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Instance {
    vehicles: Vec<Vehicle>,
    tasks: Vec<Task>,
}

impl Instance {
    fn load(json: &str, topology: &Topology) -> Result<(Self, Company), Failure> {
        let inst: Instance = parse(json, "instance")?;
        let company = Company::new(0, inst.vehicles.clone()).map_err(|e| Failure::new(ApdpStatus::InvalidArgument, e))?;
        company
            .check_cities(topology.num_cities())
            .map_err(|e| Failure::new(ApdpStatus::InvalidArgument, e))?;
        for t in &inst.tasks {
            t.check().map_err(|e| Failure::new(ApdpStatus::InvalidArgument, e))?;
            if t.pickup.max(t.delivery) >= topology.num_cities() {
                return Err(Failure::new(ApdpStatus::InvalidArgument, format!("task {} leaves the map", t.id)));
            }
        }
        Ok((inst, company))
    }

    fn plan(&self, json: &str) -> Result<Plan, Failure> {
        let doc: PlanDoc = parse(json, "plan")?;
        doc.resolve(&self.tasks).map_err(|e| Failure::new(ApdpStatus::InvalidArgument, e))
    }
}

fn planning_failure(e: PlanningError) -> Failure {
    match e {
        PlanningError::Infeasible { .. } => Failure::new(ApdpStatus::Infeasible, e),
        _ => Failure::new(ApdpStatus::InvalidArgument, e),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn apdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn apdp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from an `out_json` parameter of this library and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn apdp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a bundled topology by name or a topology document from a path.
///
/// # Safety
/// `name_or_path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn apdp_topology_load(name_or_path: *const c_char, out: *mut *mut ApdpTopology) -> ApdpStatus {
    guard(|| {
        let name = text(name_or_path, "name_or_path")?;
        if out.is_null() {
            return Err(Failure::new(ApdpStatus::NullArgument, "out is null"));
        }
        let t = Topology::resolve(name).map_err(|e| Failure::new(ApdpStatus::NotFound, e))?;
        *out = Box::into_raw(Box::new(ApdpTopology { inner: Arc::new(t) }));
        Ok(())
    })
}

/// Builds a topology from a JSON topology document.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn apdp_topology_from_json(json: *const c_char, out: *mut *mut ApdpTopology) -> ApdpStatus {
    guard(|| {
        let json = text(json, "json")?;
        if out.is_null() {
            return Err(Failure::new(ApdpStatus::NullArgument, "out is null"));
        }
        let t = Topology::from_json(json).map_err(|e| Failure::new(ApdpStatus::Malformed, e))?;
        *out = Box::into_raw(Box::new(ApdpTopology { inner: Arc::new(t) }));
        Ok(())
    })
}

/// Releases a topology handle. NULL is ignored.
///
/// # Safety
/// `t` must come from a constructor of this library and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn apdp_topology_free(t: *mut ApdpTopology) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of cities, or 0 for a NULL handle.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn apdp_topology_num_cities(t: *const ApdpTopology) -> usize {
    t.as_ref().map_or(0, |t| t.inner.num_cities())
}

/// Shortest-path distance in km between two cities.
///
/// # Safety
/// `t` must be a live handle; `out_km` must be writable.
#[no_mangle]
pub unsafe extern "C" fn apdp_topology_distance(
    t: *const ApdpTopology,
    from: usize,
    to: usize,
    out_km: *mut f64,
) -> ApdpStatus {
    guard(|| {
        let t = topology(t)?;
        if out_km.is_null() {
            return Err(Failure::new(ApdpStatus::NullArgument, "out_km is null"));
        }
        let n = t.num_cities();
        if from >= n || to >= n {
            return Err(Failure::new(ApdpStatus::InvalidArgument, format!("city out of range for {n} cities")));
        }
        *out_km = t.distance(from, to);
        Ok(())
    })
}

/// Checks a plan against an instance. Writes
/// `{"ok": bool, "cost": number, "violations": [...]}`.
///
/// # Safety
/// Pointers must be valid C strings / writable; `t` a live handle.
#[no_mangle]
pub unsafe extern "C" fn apdp_validate_plan(
    t: *const ApdpTopology,
    instance_json: *const c_char,
    plan_json: *const c_char,
    out_json: *mut *mut c_char,
) -> ApdpStatus {
    guard(|| {
        let t = topology(t)?;
        let (inst, company) = Instance::load(text(instance_json, "instance_json")?, t)?;
        let plan = inst.plan(text(plan_json, "plan_json")?)?;
        let verdict =
            validate_plan(&plan, &inst.tasks, &company).map_err(|e| Failure::new(ApdpStatus::InvalidArgument, e))?;
        let cost = plan_cost(&plan, &company, t.dist());
        write_json(
            out_json,
            &serde_json::json!({ "ok": verdict.is_ok(), "cost": cost, "violations": verdict.violations }),
        )
    })
}

/// Cost of a plan: route length times cost per km, summed over vehicles.
///
/// # Safety
/// Pointers must be valid C strings / writable; `t` a live handle.
#[no_mangle]
pub unsafe extern "C" fn apdp_plan_cost(
    t: *const ApdpTopology,
    instance_json: *const c_char,
    plan_json: *const c_char,
    out_cost: *mut f64,
) -> ApdpStatus {
    guard(|| {
        let t = topology(t)?;
        let (inst, company) = Instance::load(text(instance_json, "instance_json")?, t)?;
        let plan = inst.plan(text(plan_json, "plan_json")?)?;
        if out_cost.is_null() {
            return Err(Failure::new(ApdpStatus::NullArgument, "out_cost is null"));
        }
        if plan.routes.len() != company.vehicles.len() {
            return Err(Failure::new(ApdpStatus::InvalidArgument, "route count differs from fleet size"));
        }
        *out_cost = plan_cost(&plan, &company, t.dist());
        Ok(())
    })
}

/// Solves a static instance. Writes `{"cost": number, "plan": {...}}`.
/// `iterations` and `time_ms` bound local search; the exact searches ignore
/// them.
///
/// # Safety
/// Pointers must be valid C strings / writable; `t` a live handle.
#[no_mangle]
pub unsafe extern "C" fn apdp_solve(
    t: *const ApdpTopology,
    instance_json: *const c_char,
    algorithm: ApdpAlgorithm,
    iterations: u64,
    time_ms: u64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ApdpStatus {
    guard(|| {
        let t = topology(t)?;
        let (inst, company) = Instance::load(text(instance_json, "instance_json")?, t)?;
        let dist = t.dist();
        let plan = match algorithm {
            ApdpAlgorithm::Sls => {
                if iterations == 0 && time_ms == 0 {
                    return Err(Failure::new(ApdpStatus::InvalidArgument, "need an iteration or time budget"));
                }
                let mut deadline = Deadline::never();
                if iterations > 0 {
                    deadline = deadline.with_iterations(iterations);
                }
                if time_ms > 0 {
                    deadline = deadline.with_instant(std::time::Instant::now() + Duration::from_millis(time_ms));
                }
                let mut rng = stream(seed, streams::AGENT_BASE);
                sls_optimize(&inst.tasks, &company, dist, deadline, &mut rng, SlsConfig::default())
                    .map_err(planning_failure)?
                    .plan
            }
            ApdpAlgorithm::Astar | ApdpAlgorithm::Ucs | ApdpAlgorithm::Bfs => {
                let v = &company.vehicles[0];
                let out = match algorithm {
                    ApdpAlgorithm::Astar => astar_optimal(&inst.tasks, v, dist, Heuristic::Mst),
                    ApdpAlgorithm::Ucs => astar_optimal(&inst.tasks, v, dist, Heuristic::Zero),
                    _ => bfs_optimal(&inst.tasks, v, dist),
                }
                .map_err(planning_failure)?;
                let mut plan = Plan::empty(company.vehicles.len());
                plan.routes[0] = out.route;
                plan
            }
        };
        let cost = plan_cost(&plan, &company, dist);
        write_json(out_json, &serde_json::json!({ "cost": cost, "plan": plan.to_doc() }))
    })
}

/// Plays one match between two built-in agents; `agent_a` controls the first
/// company. `config_json` may be NULL for defaults, otherwise a run
/// configuration document. Writes the match result as JSON.
///
/// # Safety
/// Pointers must be valid C strings (or NULL where allowed) / writable; `t`
/// a live handle.
#[no_mangle]
pub unsafe extern "C" fn apdp_run_match(
    t: *const ApdpTopology,
    agent_a: *const c_char,
    agent_b: *const c_char,
    config_json: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ApdpStatus {
    guard(|| {
        let t = topology(t)?;
        let config = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(text(config_json, "config_json")?).map_err(|e| Failure::new(ApdpStatus::Malformed, e))?
        };
        let mut agents = Vec::with_capacity(2);
        for (p, what) in [(agent_a, "agent_a"), (agent_b, "agent_b")] {
            let name = text(p, what)?;
            let canonical = canonical_name(name)
                .ok_or_else(|| Failure::new(ApdpStatus::NotFound, format!("unknown agent {name:?}")))?;
            let entrant = Entrant::builtin(canonical, config.tuning).expect("canonical names resolve");
            agents.push(entrant.spawn());
        }
        let run = run_match(&mut agents, t, &config.match_config(), seed)
            .map_err(|e| Failure::new(ApdpStatus::InvalidArgument, e))?;
        let value = serde_json::to_value(&run.result).map_err(|e| Failure::new(ApdpStatus::Internal, e))?;
        write_json(out_json, &value)
    })
}
