//! Parameter points, parallel runs and output rows.

use rayon::prelude::*;
use ripplecache_core::experiment::{run_point, ExperimentError, PointResult, PolicyKind};
use ripplecache_core::topology::Topology;

use crate::config::{Config, ConfigError};
use crate::summary::{run_row, RunRow, SessionRow};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{policy} seed {seed}: {source}")]
    Experiment { policy: PolicyKind, seed: u64, source: ExperimentError },
    #[error("bad --param `{0}`: expected name=v1,v2,...")]
    ParamSpec(String),
}

/// Parses `name=v1,v2,...`.
pub fn parse_param(spec: &str) -> Result<(String, Vec<f64>), RunError> {
    let bad = || RunError::ParamSpec(spec.to_owned());
    let (name, values) = spec.split_once('=').ok_or_else(bad)?;
    let values: Vec<f64> = values.split(',').map(|v| v.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
    if name.trim().is_empty() || values.is_empty() {
        return Err(bad());
    }
    Ok((name.trim().to_owned(), values))
}

/// Cartesian product of the given parameter values over `base`.
pub fn expand_points(base: &Config, params: &[(String, Vec<f64>)]) -> Result<Vec<Config>, RunError> {
    let mut points = vec![base.clone()];
    for (name, values) in params {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for p in &points {
            for &v in values {
                let mut c = p.clone();
                c.set_param(name, v)?;
                next.push(c);
            }
        }
        points = next;
    }
    Ok(points)
}

/// One run of the sweep.
#[derive(Clone, Debug)]
pub struct Job {
    pub point: Config,
    pub policy: PolicyKind,
    pub seed: u64,
}

/// Every (point, policy, seed) in a stable order.
pub fn jobs(points: &[Config]) -> Result<Vec<Job>, RunError> {
    let mut out = Vec::new();
    for point in points {
        for policy in point.policies()? {
            for &seed in &point.run.seeds {
                out.push(Job { point: point.clone(), policy, seed });
            }
        }
    }
    Ok(out)
}

pub struct RunOutcome {
    pub job: Job,
    pub row: RunRow,
    pub sessions: Vec<SessionRow>,
    pub result: PointResult,
}

pub fn run_job(topology: &Topology, job: &Job) -> Result<RunOutcome, RunError> {
    let params = job.point.params(job.policy, job.seed)?;
    let result = run_point(topology, &params).map_err(|source| RunError::Experiment {
        policy: job.policy,
        seed: job.seed,
        source,
    })?;
    let (profile, policy) = (job.point.run.profile.as_str(), job.policy.as_str());
    let row = run_row(profile, policy, params.omega, params.workload.alpha, params.eta, job.seed, &result.qoe);
    let sessions = result
        .qoe
        .iter()
        .map(|q| SessionRow {
            profile: profile.into(),
            policy: policy.into(),
            omega: params.omega,
            alpha: params.workload.alpha,
            eta: params.eta,
            seed: job.seed,
            session_id: q.session_id,
            consumer: q.consumer.0,
            avg_bitrate_mbps: q.avg_bitrate / 1e6,
            switch_count: q.switch_count,
            down_switches: q.down_switches,
            rebuffer_pct: q.rebuffer_pct,
        })
        .collect();
    log::info!("{policy} seed {}: {:.3} Mbps, {:.2} switches", job.seed, row.avg_bitrate_mbps, row.switch_count_mean);
    Ok(RunOutcome { job: job.clone(), row, sessions, result })
}

/// Runs all jobs in parallel; `each` sees every outcome in job order and
/// decides what to keep, so full traces need not stay in memory.
pub fn run_all<T: Send>(
    topology: &Topology,
    jobs: &[Job],
    each: impl Fn(RunOutcome) -> T + Sync,
) -> Result<Vec<T>, RunError> {
    jobs.par_iter().map(|j| run_job(topology, j).map(&each)).collect()
}
