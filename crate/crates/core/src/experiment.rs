//! One experiment point: warm-up, placement, measurement.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::baselines::{OnlinePolicy, ProbCacheParams};
use crate::catalog::{sample_sessions, Catalog, ConsumerId, SessionSchedule, Workload};
use crate::classic::{iterate_placement, ClassicError, ClassicParams, IterationReport};
use crate::finder::{run_ripple_finder, FinderError, FinderReport, DEFAULT_MAX_ITERS};
use crate::metrics::{session_qoe, store_size_from_omega, SessionQoE};
use crate::placement::Placement;
use crate::sim::store::Eviction;
use crate::sim::{run_simulation, CachePolicy, SimConfig, SimError, TraceOutput};
use crate::topology::Topology;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PolicyKind {
    Ce2Lru,
    Ce2Lfu,
    ProbCache,
    Classic,
    Finder,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::Ce2Lru, PolicyKind::Ce2Lfu, PolicyKind::ProbCache, PolicyKind::Classic, PolicyKind::Finder];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ce2Lru => "ce2-lru",
            PolicyKind::Ce2Lfu => "ce2-lfu",
            PolicyKind::ProbCache => "probcache",
            PolicyKind::Classic => "classic",
            PolicyKind::Finder => "finder",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy `{0}`")]
pub struct UnknownPolicy(pub &'static str);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or(UnknownPolicy("expected ce2-lru, ce2-lfu, probcache, classic or finder"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    pub catalog: Catalog,
    pub workload: Workload,
    pub consumers: u32,
    /// Store size as a fraction of an even split of the corpus over routers.
    pub omega: f64,
    pub eta: f64,
    pub policy: PolicyKind,
    pub seed: u64,
    /// Share of the horizon used to warm up; sessions starting in it are not measured.
    pub warmup_fraction: f64,
    /// Time allowed after the horizon for running sessions to finish.
    pub drain: f64,
    /// Adaptation and access network settings; seed, consumers and stop time are set per run.
    pub sim: SimConfig,
    pub classic: ClassicParams,
    pub finder_iters: usize,
    /// Simulate-then-place cycles for the heuristic placement.
    pub finder_rounds: usize,
    pub probcache: ProbCacheParams,
}

impl ExperimentParams {
    pub fn new(catalog: Catalog, workload: Workload, consumers: u32, policy: PolicyKind) -> Self {
        let deadline = catalog.segment_duration();
        ExperimentParams {
            catalog,
            workload,
            consumers,
            omega: 0.2,
            eta: 1.0,
            policy,
            seed: 1,
            warmup_fraction: 1.0 / 3.0,
            drain: 600.0,
            sim: SimConfig::default(),
            classic: ClassicParams::new(1.0, deadline),
            finder_iters: DEFAULT_MAX_ITERS,
            finder_rounds: 4,
            probcache: ProbCacheParams::default(),
        }
    }

    pub fn warmup_end(&self) -> f64 {
        self.workload.horizon * self.warmup_fraction
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            consumers: self.consumers,
            stop_time: self.workload.horizon + self.drain,
            ..self.sim.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Classic(#[from] ClassicError),
    #[error(transparent)]
    Finder(#[from] FinderError),
}

/// How a static placement was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementInfo {
    pub placement: Placement,
    /// Solves or negotiation rounds in the final placement step.
    pub iterations: usize,
    pub converged: bool,
    pub budget_hit: bool,
    pub objective: Option<f64>,
    pub classic: Option<IterationReport>,
    pub finder: Option<FinderReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub store_size: u64,
    pub schedule: SessionSchedule,
    pub placement: Option<PlacementInfo>,
    pub trace: TraceOutput,
    /// Sessions starting after the warm-up.
    pub qoe: Vec<SessionQoE>,
}

/// Topology with every router store sized from `omega`.
pub fn sized_topology(topology: &Topology, catalog: &Catalog, omega: f64) -> (Topology, u64) {
    let routers = topology.routers().len().max(1);
    let size = store_size_from_omega(catalog.total_bytes(), routers, omega);
    (topology.with_uniform_capacity(size), size)
}

fn finder_placement(
    topology: &Topology,
    params: &ExperimentParams,
    warm: &SessionSchedule,
    cfg: &SimConfig,
) -> Result<PlacementInfo, ExperimentError> {
    let catalog = &params.catalog;
    let mut stats = run_simulation(topology, catalog, &CachePolicy::NoCache, warm, cfg)?.stats;
    let mut round = 0;
    loop {
        round += 1;
        let report = match run_ripple_finder(topology, catalog, &stats, params.finder_iters) {
            Ok(r) => r,
            Err(FinderError::NonConvergence { report }) => *report,
            Err(e) => return Err(e.into()),
        };
        if round >= params.finder_rounds.max(1) {
            return Ok(PlacementInfo {
                placement: report.placement.clone(),
                iterations: report.iterations,
                converged: report.converged,
                budget_hit: false,
                objective: None,
                classic: None,
                finder: Some(report),
            });
        }
        stats = run_simulation(topology, catalog, &CachePolicy::Static(report.placement), warm, cfg)?.stats;
    }
}

fn validate(params: &ExperimentParams) -> Result<(), ExperimentError> {
    if !(params.omega >= 0.0 && params.omega <= 1.0) {
        return Err(ExperimentError::Config("omega must be in [0, 1]"));
    }
    if !(params.eta >= 0.0) {
        return Err(ExperimentError::Config("eta must be non-negative"));
    }
    if !(params.warmup_fraction >= 0.0 && params.warmup_fraction < 1.0) {
        return Err(ExperimentError::Config("warm-up fraction must be in [0, 1)"));
    }
    if !(params.workload.mean_interval > 0.0) {
        return Err(ExperimentError::Config("mean session interval must be positive"));
    }
    Ok(())
}

/// Sized topology, full schedule and simulator settings of one point.
struct Setup {
    topo: Topology,
    store_size: u64,
    schedule: SessionSchedule,
    cfg: SimConfig,
}

fn setup(topology: &Topology, params: &ExperimentParams) -> Result<Setup, ExperimentError> {
    validate(params)?;
    let (topo, store_size) = sized_topology(topology, &params.catalog, params.omega);
    let consumers: Vec<ConsumerId> = (0..params.consumers).map(ConsumerId).collect();
    let schedule = sample_sessions(&params.catalog, &consumers, &params.workload, params.seed);
    Ok(Setup { topo, store_size, schedule, cfg: params.sim_config() })
}

fn policy_for(
    setup: &Setup,
    params: &ExperimentParams,
) -> Result<(CachePolicy, Option<PlacementInfo>), ExperimentError> {
    let warm = setup.schedule.before(params.warmup_end());
    Ok(match params.policy {
        PolicyKind::Ce2Lru => (CachePolicy::Online(OnlinePolicy::Ce2(Eviction::Lru)), None),
        PolicyKind::Ce2Lfu => (CachePolicy::Online(OnlinePolicy::Ce2(Eviction::Lfu)), None),
        PolicyKind::ProbCache => (CachePolicy::Online(OnlinePolicy::ProbCache(params.probcache)), None),
        PolicyKind::Classic => {
            let classic = ClassicParams { eta: params.eta, ..params.classic };
            let report = match iterate_placement(&setup.topo, &params.catalog, &warm, &setup.cfg, &classic) {
                Ok(r) => r,
                Err(ClassicError::NonConvergence { report }) => *report,
                Err(e) => return Err(e.into()),
            };
            let info = PlacementInfo {
                placement: report.solution.placement.clone(),
                iterations: report.objectives.len(),
                converged: report.converged,
                budget_hit: report.budget_hit,
                objective: Some(report.solution.objective),
                classic: Some(report),
                finder: None,
            };
            (CachePolicy::Static(info.placement.clone()), Some(info))
        }
        PolicyKind::Finder => {
            let info = finder_placement(&setup.topo, params, &warm, &setup.cfg)?;
            (CachePolicy::Static(info.placement.clone()), Some(info))
        }
    })
}

/// Warm-up and placement only: the static placement the policy would run
/// with, or `None` for online policies.
pub fn plan_placement(
    topology: &Topology,
    params: &ExperimentParams,
) -> Result<Option<PlacementInfo>, ExperimentError> {
    let setup = setup(topology, params)?;
    Ok(policy_for(&setup, params)?.1)
}

/// Runs one (parameter point, seed): sample sessions, warm up, place if the
/// policy needs it, then simulate the whole schedule.
pub fn run_point(topology: &Topology, params: &ExperimentParams) -> Result<PointResult, ExperimentError> {
    let setup = setup(topology, params)?;
    let (policy, placement) = policy_for(&setup, params)?;
    let trace = run_simulation(&setup.topo, &params.catalog, &policy, &setup.schedule, &setup.cfg)?;
    let warm_end = params.warmup_end();
    let qoe = trace
        .sessions
        .iter()
        .filter(|s| s.session.start >= warm_end && (!s.records.is_empty() || s.aborted.is_some()))
        .map(|s| session_qoe(s, &params.catalog))
        .collect();
    Ok(PointResult { store_size: setup.store_size, schedule: setup.schedule, placement, trace, qoe })
}
