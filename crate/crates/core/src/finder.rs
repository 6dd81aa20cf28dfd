//! Distributed placement heuristic over cache paths.
//!
//! Each edge router ranks segments per bitrate by `μ(b)·θ`, stacks the most
//! valuable ones into the combined capacity of its path, and pours the
//! stacks edge-to-core into per-router candidate tables (highest bitrate
//! closest to consumers). Routers then merge the candidates they receive,
//! keep what fits, and report back how much of each path's nomination they
//! kept. Paths shrink their per-router volumes until nothing changes.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::catalog::{BitrateRank, Catalog, SegmentId};
use crate::placement::Placement;
use crate::sim::stats::StatsLedger;
use crate::topology::{NodeId, Topology, TopologyError};

pub const DEFAULT_MAX_ITERS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankedEntry {
    pub segment: SegmentId,
    pub utility: f64,
}

/// Higher utility first, then bitrate descending, file and segment ascending.
pub fn utility_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.utility.total_cmp(&a.utility).then(a.segment.tie_order(&b.segment))
}

/// Ranking tables of one edge, indexed by rank index; each sorted by `utility_order`.
pub fn build_ranking_tables(
    stats: &StatsLedger,
    catalog: &Catalog,
    edge: NodeId,
    files: impl Iterator<Item = u32>,
) -> Vec<Vec<RankedEntry>> {
    let mut tables: Vec<Vec<RankedEntry>> = vec![Vec::new(); catalog.rank_count()];
    for f in files {
        for k in 1..=catalog.segments() {
            for r in catalog.ranks() {
                let segment = SegmentId::new(f, k, r);
                let utility = catalog.mu(r) * stats.theta(edge, segment) as f64;
                tables[r.index()].push(RankedEntry { segment, utility });
            }
        }
    }
    for t in tables.iter_mut() {
        t.sort_by(utility_order);
    }
    tables
}

/// Per-hop volumes of one path, hops `1..L` (the producer holds no cache).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathCapacity {
    pub per_hop: Vec<u64>,
}

impl PathCapacity {
    pub fn total(&self) -> u64 {
        self.per_hop.iter().sum()
    }
}

/// Volumes of the path's router stores: full store sizes before any
/// negotiation, else the volumes returned by the previous round.
pub fn discover_capacity(topology: &Topology, path: &[NodeId], current: Option<&PathCapacity>) -> PathCapacity {
    match current {
        Some(c) => c.clone(),
        None => PathCapacity { per_hop: path[..path.len() - 1].iter().map(|&n| topology.capacity(n)).collect() },
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CacheStacks {
    /// Per rank index, bottom (highest utility) first.
    pub stacks: Vec<Vec<RankedEntry>>,
    pub complete: Vec<bool>,
    pub popped: Vec<RankedEntry>,
}

impl CacheStacks {
    pub fn bytes(&self, size: impl Fn(BitrateRank) -> u64) -> u64 {
        self.stacks.iter().flatten().map(|e| size(e.segment.rank)).sum()
    }
}

/// Fills one stack per bitrate, highest bitrate first, while the stacked
/// size fits `capacity`. On overflow the lowest-utility stack top is popped
/// (ties pop the least preferred entry); a pop from the stack being filled
/// completes it and filling moves to the next lower bitrate.
pub fn push_pop(tables: &[Vec<RankedEntry>], capacity: u64, size: impl Fn(BitrateRank) -> u64) -> CacheStacks {
    let n = tables.len();
    let mut st = CacheStacks { stacks: vec![Vec::new(); n], complete: vec![false; n], popped: Vec::new() };
    let mut total: u64 = 0;
    for cur in (0..n).rev() {
        for &e in &tables[cur] {
            st.stacks[cur].push(e);
            total += size(e.segment.rank);
            while total > capacity {
                let victim = (0..n)
                    .filter_map(|b| st.stacks[b].last().map(|t| (b, t)))
                    .max_by(|(_, x), (_, y)| utility_order(x, y))
                    .map(|(b, _)| b)
                    .expect("overflow implies a non-empty stack");
                let e = st.stacks[victim].pop().expect("victim stack is non-empty");
                total -= size(e.segment.rank);
                st.popped.push(e);
                if victim == cur {
                    st.complete[cur] = true;
                }
            }
            if st.complete[cur] {
                break;
            }
        }
    }
    st
}

/// Pours stacks, highest bitrate first and best entries first, into the
/// per-hop tables from the edge towards the core. A table that cannot take
/// the next entry is closed; entries left when all tables are closed are
/// not nominated.
pub fn nominate_cct(
    stacks: &CacheStacks,
    volumes: &PathCapacity,
    size: impl Fn(BitrateRank) -> u64,
) -> Vec<Vec<RankedEntry>> {
    let hops = volumes.per_hop.len();
    let mut ccts: Vec<Vec<RankedEntry>> = vec![Vec::new(); hops];
    let mut used = vec![0u64; hops];
    let mut j = 0;
    'pour: for stack in stacks.stacks.iter().rev() {
        for &e in stack {
            let s = size(e.segment.rank);
            while j < hops && used[j] + s > volumes.per_hop[j] {
                j += 1;
            }
            if j == hops {
                break 'pour;
            }
            ccts[j].push(e);
            used[j] += s;
        }
    }
    ccts
}

/// Pairs of consecutive non-empty tables (edge side first) where a lower
/// bitrate sits closer to consumers than a higher one.
pub fn ripple_violations(ccts: &[Vec<RankedEntry>]) -> usize {
    let bounds: Vec<(BitrateRank, BitrateRank)> = ccts
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let min = c.iter().map(|e| e.segment.rank).min().expect("non-empty");
            let max = c.iter().map(|e| e.segment.rank).max().expect("non-empty");
            (min, max)
        })
        .collect();
    bounds.windows(2).filter(|w| w[0].0 < w[1].1).count()
}

/// Merges the candidate tables a router received (same segment: utilities
/// add up) and keeps the best entries that fit `capacity`.
pub fn negotiate(
    candidates: impl IntoIterator<Item = RankedEntry>,
    capacity: u64,
    size: impl Fn(BitrateRank) -> u64,
) -> BTreeSet<SegmentId> {
    let mut merged: BTreeMap<SegmentId, f64> = BTreeMap::new();
    for e in candidates {
        *merged.entry(e.segment).or_insert(0.0) += e.utility;
    }
    let mut ranked: Vec<RankedEntry> =
        merged.into_iter().map(|(segment, utility)| RankedEntry { segment, utility }).collect();
    ranked.sort_by(utility_order);
    let mut kept = BTreeSet::new();
    let mut used = 0u64;
    for e in ranked {
        let s = size(e.segment.rank);
        if used + s <= capacity {
            used += s;
            kept.insert(e.segment);
        }
    }
    kept
}

/// New volume of one hop: bytes of the nomination the router kept, or the
/// old volume when it kept all of it.
pub fn update_volume(
    kept: &BTreeSet<SegmentId>,
    cct: &[RankedEntry],
    previous: u64,
    size: impl Fn(BitrateRank) -> u64,
) -> u64 {
    if cct.iter().all(|e| kept.contains(&e.segment)) {
        return previous;
    }
    cct.iter().filter(|e| kept.contains(&e.segment)).map(|e| size(e.segment.rank)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathState {
    pub nodes: Vec<NodeId>,
    pub tables: Vec<Vec<RankedEntry>>,
    pub volumes: PathCapacity,
    pub stacks: CacheStacks,
    pub ccts: Vec<Vec<RankedEntry>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinderReport {
    pub placement: Placement,
    /// Negotiation rounds run.
    pub iterations: usize,
    pub converged: bool,
    /// Per round (round 0 = before negotiation): per-path volumes.
    pub history: Vec<Vec<PathCapacity>>,
    /// Final state of every path.
    pub paths: Vec<PathState>,
}

impl FinderReport {
    /// True when no path's total volume ever grew between rounds.
    pub fn monotone(&self) -> bool {
        self.history
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a.per_hop.iter().zip(&b.per_hop).all(|(x, y)| y <= x)))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FinderError {
    #[error("volumes still changing after {} rounds", report.iterations)]
    NonConvergence { report: Box<FinderReport> },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

fn round(topology: &Topology, catalog: &Catalog, paths: &mut [PathState]) -> Placement {
    let size = |r: BitrateRank| catalog.segment_size(r);
    let mut inbox: BTreeMap<NodeId, Vec<RankedEntry>> = BTreeMap::new();
    for p in paths.iter_mut() {
        p.stacks = push_pop(&p.tables, p.volumes.total(), size);
        p.ccts = nominate_cct(&p.stacks, &p.volumes, size);
        for (j, cct) in p.ccts.iter().enumerate() {
            inbox.entry(p.nodes[j]).or_default().extend(cct.iter().copied());
        }
    }
    let mut placement = Placement::new();
    for (node, entries) in inbox {
        for s in negotiate(entries, topology.capacity(node), size) {
            placement.insert(node, s);
        }
    }
    placement
}

/// Runs rounds of nomination and negotiation until every path keeps its
/// volumes or `max_iters` rounds have run. With `max_iters == 0` a single
/// nomination at full store sizes is negotiated and returned unconverged.
pub fn run_ripple_finder(
    topology: &Topology,
    catalog: &Catalog,
    stats: &StatsLedger,
    max_iters: usize,
) -> Result<FinderReport, FinderError> {
    let producers = topology.producers();
    let mut paths = Vec::new();
    for edge in topology.edges() {
        for &producer in &producers {
            let files: Vec<u32> =
                (1..=catalog.files()).filter(|&f| topology.producer_for_file(f) == producer).collect();
            let demanded = stats.requests_at(edge).any(|(s, _)| files.binary_search(&s.file).is_ok());
            if !demanded {
                continue;
            }
            let path = topology.shortest_delay_path(edge, producer)?;
            let nodes = path.nodes().to_vec();
            let volumes = discover_capacity(topology, &nodes, None);
            let tables = build_ranking_tables(stats, catalog, edge, files.into_iter());
            paths.push(PathState { nodes, tables, volumes, stacks: CacheStacks::default(), ccts: Vec::new() });
        }
    }

    let size = |r: BitrateRank| catalog.segment_size(r);
    let mut history = vec![paths.iter().map(|p| p.volumes.clone()).collect::<Vec<_>>()];
    if max_iters == 0 {
        let placement = round(topology, catalog, &mut paths);
        return Ok(FinderReport { placement, iterations: 0, converged: false, history, paths });
    }
    let mut iterations = 0;
    loop {
        let placement = round(topology, catalog, &mut paths);
        iterations += 1;
        let mut changed = false;
        for p in paths.iter_mut() {
            let per_hop = p
                .ccts
                .iter()
                .enumerate()
                .map(|(j, cct)| {
                    let kept: BTreeSet<SegmentId> = placement.at(p.nodes[j]).collect();
                    update_volume(&kept, cct, p.volumes.per_hop[j], size)
                })
                .collect();
            let next = PathCapacity { per_hop };
            changed |= next.total() != p.volumes.total();
            p.volumes = next;
        }
        history.push(paths.iter().map(|p| p.volumes.clone()).collect());
        let report =
            |placement, converged, history, paths| FinderReport { placement, iterations, converged, history, paths };
        if !changed {
            return Ok(report(placement, true, history, paths));
        }
        if iterations >= max_iters {
            return Err(FinderError::NonConvergence { report: Box::new(report(placement, false, history, paths)) });
        }
    }
}
