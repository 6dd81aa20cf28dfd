//! Comparison caching policies applied on the data return path.

use crate::sim::store::Eviction;

/// Default target time window for probabilistic caching.
pub const DEFAULT_T_TW: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbCacheParams {
    pub t_tw: f64,
}

impl Default for ProbCacheParams {
    fn default() -> Self {
        ProbCacheParams { t_tw: DEFAULT_T_TW }
    }
}

/// Online decision rule run by the simulator when data passes a router.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OnlinePolicy {
    /// Cache everything everywhere.
    Ce2(Eviction),
    /// Probabilistic caching; stores evict LRU.
    ProbCache(ProbCacheParams),
}

/// Caching probability for a router `x` hops from the serving node on a
/// delivery that travels `c` hops to the consumer, homogeneous-store form:
/// `((c - x + 1) / t_tw) * (x / c)`, clamped to `[0, 1]`.
pub fn probcache_probability(x: usize, c: usize, params: &ProbCacheParams) -> f64 {
    debug_assert!(x >= 1 && x <= c);
    let (x, c) = (x as f64, c as f64);
    ((c - x + 1.0) / params.t_tw * (x / c)).clamp(0.0, 1.0)
}
