//! Exact reward-maximizing placement over forwarding paths.
//!
//! A placement `x` marks which router stores hold which segments. Along a
//! path the hit indicator `δ^i` is the prefix-OR of `x` over hops `1..=i`, so
//! a request earns the reward of the first hop holding its segment; the
//! producer at the last hop always holds it.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::catalog::{BitrateRank, Catalog, SegmentId, SessionSchedule};
use crate::placement::{CapacityViolation, Placement};
use crate::reward::{gamma, RippleBitrateTable, MIN_DELAY_SAMPLES};
use crate::sim::stats::StatsLedger;
use crate::sim::{run_simulation, CachePolicy, SimConfig, SimError};
use crate::topology::{NodeId, Topology, TopologyError};

/// Default search-node budget of the exact solver.
pub const DEFAULT_BUDGET: u64 = 1 << 22;

/// One forwarding path, hop 1 (edge) through hop L (producer).
#[derive(Clone, Debug, PartialEq)]
pub struct BipPath {
    pub nodes: Vec<NodeId>,
}

impl BipPath {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn producer(&self) -> NodeId {
        self.nodes[self.nodes.len() - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PopularityViolation {
    pub path: usize,
    pub more_popular: SegmentId,
    pub less_popular: SegmentId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub capacity: Vec<CapacityViolation>,
    pub popularity: Vec<PopularityViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.capacity.is_empty() && self.popularity.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementSolution {
    pub placement: Placement,
    pub objective: f64,
    /// False when the search stopped on its budget.
    pub optimal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub solution: PlacementSolution,
    /// Objective of each solve, in order.
    pub objectives: Vec<f64>,
    pub converged: bool,
    /// Some solve stopped on its budget.
    pub budget_hit: bool,
    pub ripple_bitrates: RippleBitrateTable,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ClassicError {
    #[error("invalid instance: {0}")]
    InvalidInstance(&'static str),
    #[error("placement violates the store size or popularity order")]
    InfeasibleX(FeasibilityReport),
    #[error("search budget exhausted; best placement found has objective {}", incumbent.objective)]
    BudgetExceeded { incumbent: PlacementSolution },
    #[error("objective did not settle within {} solves", report.objectives.len())]
    NonConvergence { report: Box<IterationReport> },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// `δ^i = x^1 ∨ … ∨ x^i`.
pub fn delta_from_x(x: &[bool]) -> Vec<bool> {
    x.iter()
        .scan(false, |acc, &v| {
            *acc |= v;
            Some(*acc)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BipInstance {
    paths: Vec<BipPath>,
    /// Per path: requested segments with positive counts.
    theta: Vec<BTreeMap<SegmentId, u64>>,
    /// `gamma[path][hop - 1][rank index]`.
    gamma: Vec<Vec<Vec<f64>>>,
    /// Store sizes of routers; producers and unknown nodes have none.
    capacity: BTreeMap<NodeId, u64>,
    /// Segment size per rank index.
    sizes: Vec<u64>,
    /// `rankings[path][rank index]`: requested segments, most popular first.
    rankings: Vec<Vec<Vec<SegmentId>>>,
    /// Big-M constant of the linearized popularity constraint. The solver
    /// evaluates that constraint directly, so it is informational.
    big_m: f64,
}

impl BipInstance {
    pub fn new(
        paths: Vec<BipPath>,
        theta: Vec<BTreeMap<SegmentId, u64>>,
        gamma: Vec<Vec<Vec<f64>>>,
        capacity: BTreeMap<NodeId, u64>,
        sizes: Vec<u64>,
    ) -> Result<Self, ClassicError> {
        if sizes.is_empty() {
            return Err(ClassicError::InvalidInstance("no bitrate sizes"));
        }
        if theta.len() != paths.len() || gamma.len() != paths.len() {
            return Err(ClassicError::InvalidInstance("per-path tables do not match the path count"));
        }
        for (p, path) in paths.iter().enumerate() {
            if path.len() < 2 {
                return Err(ClassicError::InvalidInstance("paths need an edge and a producer"));
            }
            if gamma[p].len() != path.len() || gamma[p].iter().any(|g| g.len() != sizes.len()) {
                return Err(ClassicError::InvalidInstance("reward table shape does not match the path"));
            }
            if gamma[p].iter().flatten().any(|g| !g.is_finite()) {
                return Err(ClassicError::InvalidInstance("rewards must be finite"));
            }
            if theta[p].keys().any(|s| s.rank.index() >= sizes.len()) {
                return Err(ClassicError::InvalidInstance("segment rank outside the size table"));
            }
        }
        let theta: Vec<BTreeMap<SegmentId, u64>> =
            theta.into_iter().map(|m| m.into_iter().filter(|&(_, c)| c > 0).collect()).collect();
        let rankings = theta
            .iter()
            .map(|m| {
                let mut per_rank = vec![Vec::new(); sizes.len()];
                for &s in m.keys() {
                    per_rank[s.rank.index()].push(s);
                }
                for list in per_rank.iter_mut() {
                    list.sort_by(|a: &SegmentId, b: &SegmentId| {
                        m[b].cmp(&m[a]).then(a.file.cmp(&b.file)).then(a.segment.cmp(&b.segment))
                    });
                }
                per_rank
            })
            .collect();
        let big_m = paths.iter().map(|p| p.len()).max().unwrap_or(0) as f64;
        Ok(BipInstance { paths, theta, gamma, capacity, sizes, rankings, big_m })
    }

    /// Instance for every (edge, producer) path that saw requests, with
    /// rewards from the given ripple bitrates.
    pub fn from_stats(
        topology: &Topology,
        catalog: &Catalog,
        stats: &StatsLedger,
        rb: &RippleBitrateTable,
        eta: f64,
    ) -> Result<Self, ClassicError> {
        let mu = catalog.mu_table();
        let mut paths = Vec::new();
        let mut theta = Vec::new();
        let mut gammas = Vec::new();
        for edge in topology.edges() {
            for producer in topology.producers() {
                let demand: BTreeMap<SegmentId, u64> =
                    stats.requests_at(edge).filter(|(s, _)| topology.producer_for_file(s.file) == producer).collect();
                if demand.is_empty() {
                    continue;
                }
                let path = topology.shortest_delay_path(edge, producer)?;
                let g = (1..=path.len())
                    .map(|h| catalog.ranks().map(|b| gamma(rb.get(edge, h), b, &mu, eta)).collect())
                    .collect();
                paths.push(BipPath { nodes: path.nodes().to_vec() });
                theta.push(demand);
                gammas.push(g);
            }
        }
        let capacity = topology.routers().into_iter().map(|r| (r, topology.capacity(r))).collect();
        let sizes = catalog.ranks().map(|r| catalog.segment_size(r)).collect();
        BipInstance::new(paths, theta, gammas, capacity, sizes)
    }

    pub fn paths(&self) -> &[BipPath] {
        &self.paths
    }

    pub fn theta(&self, path: usize) -> &BTreeMap<SegmentId, u64> {
        &self.theta[path]
    }

    pub fn gamma(&self, path: usize, hop: usize, rank: BitrateRank) -> f64 {
        self.gamma[path][hop - 1][rank.index()]
    }

    pub fn capacity(&self, node: NodeId) -> u64 {
        self.capacity.get(&node).copied().unwrap_or(0)
    }

    pub fn size(&self, rank: BitrateRank) -> u64 {
        self.sizes[rank.index()]
    }

    pub fn ranking(&self, path: usize, rank: BitrateRank) -> &[SegmentId] {
        &self.rankings[path][rank.index()]
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// `x` restricted to hops `1..=L` of `path`; the producer hop is always set.
    pub fn x_on_path(&self, x: &Placement, path: usize, s: SegmentId) -> Vec<bool> {
        let nodes = &self.paths[path].nodes;
        let last = nodes.len() - 1;
        nodes.iter().enumerate().map(|(j, &n)| j == last || x.contains(n, s)).collect()
    }

    /// First hop in `1..L` holding `s`, or `L` when only the producer does.
    pub fn first_hop(&self, x: &Placement, path: usize, s: SegmentId) -> usize {
        let nodes = &self.paths[path].nodes;
        (1..nodes.len()).find(|&h| x.contains(nodes[h - 1], s)).unwrap_or(nodes.len())
    }

    pub fn feasible(&self, x: &Placement) -> FeasibilityReport {
        let mut report = FeasibilityReport::default();
        for node in x.nodes() {
            let used: u64 = x.at(node).map(|s| self.sizes.get(s.rank.index()).copied().unwrap_or(u64::MAX)).sum();
            let capacity = self.capacity(node);
            if used > capacity {
                report.capacity.push(CapacityViolation { node, used, capacity });
            }
        }
        for (p, per_rank) in self.rankings.iter().enumerate() {
            let l = self.paths[p].len();
            for ranking in per_rank {
                for pair in ranking.windows(2) {
                    let h_more = self.first_hop(x, p, pair[0]);
                    let h_less = self.first_hop(x, p, pair[1]);
                    if h_more < l && h_less < h_more {
                        report.popularity.push(PopularityViolation {
                            path: p,
                            more_popular: pair[0],
                            less_popular: pair[1],
                        });
                    }
                }
            }
        }
        report
    }

    /// Σ γ(RB^i, b) · θ · (δ^i − δ^{i−1}) over paths, hops and requested segments.
    pub fn objective_value(&self, x: &Placement) -> Result<f64, ClassicError> {
        let report = self.feasible(x);
        if !report.is_feasible() {
            return Err(ClassicError::InfeasibleX(report));
        }
        Ok(self.objective_unchecked(x))
    }

    fn objective_unchecked(&self, x: &Placement) -> f64 {
        let mut total = 0.0;
        for (p, demand) in self.theta.iter().enumerate() {
            for (&s, &theta) in demand {
                let delta = delta_from_x(&self.x_on_path(x, p, s));
                let mut prev = false;
                for (i, &d) in delta.iter().enumerate() {
                    if d && !prev {
                        total += self.gamma[p][i][s.rank.index()] * theta as f64;
                    }
                    prev = d;
                }
            }
        }
        total
    }
}

/// Where one segment can be cached and which paths it earns on.
struct SegPlan {
    seg: SegmentId,
    size: u64,
    /// (path, θ) with positive demand.
    paths: Vec<(usize, u64)>,
    /// Candidate routers in decision order with their hop on each of `paths`.
    nodes: Vec<(usize, Vec<Option<usize>>)>,
    /// Reward bound ignoring capacity and popularity.
    ub: f64,
}

struct Search<'a> {
    inst: &'a BipInstance,
    plans: Vec<SegPlan>,
    seg_index: BTreeMap<SegmentId, usize>,
    node_ids: Vec<NodeId>,
    remaining: Vec<u64>,
    /// Per plan and candidate: chosen value.
    chosen: Vec<Vec<bool>>,
    /// Per plan and path slot: first caching hop once the segment is complete.
    hops: Vec<Vec<usize>>,
    complete: Vec<bool>,
    suffix_ub: Vec<f64>,
    value: f64,
}

impl Search<'_> {
    fn hop_cap(&self, si: usize, slot: usize, decided: usize) -> usize {
        let plan = &self.plans[si];
        let mut h = self.inst.paths[plan.paths[slot].0].len();
        for (ni, (_, hops)) in plan.nodes.iter().enumerate().take(decided) {
            if self.chosen[si][ni] {
                if let Some(hp) = hops[slot] {
                    h = h.min(hp);
                }
            }
        }
        h
    }

    /// Bound on the reward of a segment whose first `decided` candidates are fixed.
    fn partial_ub(&self, si: usize, decided: usize) -> f64 {
        let plan = &self.plans[si];
        let r = plan.seg.rank.index();
        let mut total = 0.0;
        for (slot, &(p, theta)) in plan.paths.iter().enumerate() {
            let cap = self.hop_cap(si, slot, decided);
            let g = &self.inst.gamma[p];
            let mut best = g[cap - 1][r];
            for (_, hops) in &plan.nodes[decided..] {
                if let Some(h) = hops[slot] {
                    if h < cap {
                        best = best.max(g[h - 1][r]);
                    }
                }
            }
            total += best * theta as f64;
        }
        total
    }

    fn seg_value(&self, si: usize) -> f64 {
        let plan = &self.plans[si];
        let r = plan.seg.rank.index();
        plan.paths.iter().zip(&self.hops[si]).map(|(&(p, theta), &h)| self.inst.gamma[p][h - 1][r] * theta as f64).sum()
    }

    fn slot_of(&self, si: usize, path: usize) -> usize {
        self.plans[si].paths.iter().position(|&(p, _)| p == path).expect("ranked segments have demand on the path")
    }

    /// Checks the popularity pairs of a just-completed segment against
    /// completed neighbours.
    fn popularity_ok(&self, si: usize) -> bool {
        let plan = &self.plans[si];
        for (slot, &(p, _)) in plan.paths.iter().enumerate() {
            let l = self.inst.paths[p].len();
            let ranking = &self.inst.rankings[p][plan.seg.rank.index()];
            let pos = ranking.iter().position(|&s| s == plan.seg).expect("segment is ranked");
            let h = self.hops[si][slot];
            if pos > 0 {
                let a = self.seg_index[&ranking[pos - 1]];
                if self.complete[a] {
                    let ha = self.hops[a][self.slot_of(a, p)];
                    if ha < l && h < ha {
                        return false;
                    }
                }
            }
            if pos + 1 < ranking.len() {
                let c = self.seg_index[&ranking[pos + 1]];
                if self.complete[c] {
                    let hc = self.hops[c][self.slot_of(c, p)];
                    if h < l && hc < h {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Cheap rejection of `x = 1` before the segment completes.
    fn may_place(&self, si: usize, ni: usize) -> bool {
        let plan = &self.plans[si];
        let (node, hops) = &plan.nodes[ni];
        if self.remaining[*node] < plan.size {
            return false;
        }
        let mut useful = false;
        for (slot, &(p, _)) in plan.paths.iter().enumerate() {
            let Some(h) = hops[slot] else { continue };
            if h >= self.hop_cap(si, slot, ni) {
                continue;
            }
            useful = true;
            // A more popular neighbour already fixed further out forbids this hop.
            let l = self.inst.paths[p].len();
            let ranking = &self.inst.rankings[p][plan.seg.rank.index()];
            let pos = ranking.iter().position(|&s| s == plan.seg).expect("segment is ranked");
            if pos > 0 {
                let a = self.seg_index[&ranking[pos - 1]];
                if self.complete[a] {
                    let ha = self.hops[a][self.slot_of(a, p)];
                    if ha < l && h < ha {
                        return false;
                    }
                }
            }
        }
        useful
    }

    fn finish_segment(&mut self, si: usize) -> bool {
        let n = self.plans[si].nodes.len();
        for slot in 0..self.plans[si].paths.len() {
            self.hops[si][slot] = self.hop_cap(si, slot, n);
        }
        self.complete[si] = true;
        if !self.popularity_ok(si) {
            self.complete[si] = false;
            return false;
        }
        self.value += self.seg_value(si);
        true
    }

    fn unfinish_segment(&mut self, si: usize) {
        self.complete[si] = false;
        self.value -= self.seg_value(si);
    }

    fn bound(&self, si: usize, decided: usize) -> f64 {
        let tail = self.suffix_ub[si + 1];
        if decided == self.plans[si].nodes.len() {
            self.value + tail
        } else {
            self.value + self.partial_ub(si, decided) + tail
        }
    }
}

fn build_plans(inst: &BipInstance) -> (Vec<SegPlan>, Vec<NodeId>) {
    let mut demand: BTreeMap<SegmentId, Vec<(usize, u64)>> = BTreeMap::new();
    for (p, m) in inst.theta.iter().enumerate() {
        for (&s, &t) in m {
            demand.entry(s).or_default().push((p, t));
        }
    }
    let node_ids: Vec<NodeId> = inst.capacity.keys().copied().collect();
    let node_pos: BTreeMap<NodeId, usize> = node_ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut plans: Vec<SegPlan> = demand
        .into_iter()
        .map(|(seg, paths)| {
            let size = inst.sizes[seg.rank.index()];
            let mut cands: BTreeMap<NodeId, Vec<Option<usize>>> = BTreeMap::new();
            for (slot, &(p, _)) in paths.iter().enumerate() {
                let nodes = &inst.paths[p].nodes;
                for (j, &n) in nodes[..nodes.len() - 1].iter().enumerate() {
                    if inst.capacity(n) >= size && node_pos.contains_key(&n) {
                        cands.entry(n).or_insert_with(|| vec![None; paths.len()])[slot] = Some(j + 1);
                    }
                }
            }
            let mut nodes: Vec<(usize, Vec<Option<usize>>)> =
                cands.into_iter().map(|(n, hops)| (node_pos[&n], hops)).collect();
            nodes.sort_by_key(|(n, hops)| (hops.iter().flatten().min().copied().unwrap_or(usize::MAX), *n));
            let r = seg.rank.index();
            let ub = paths
                .iter()
                .enumerate()
                .map(|(slot, &(p, t))| {
                    let g = &inst.gamma[p];
                    let best = nodes
                        .iter()
                        .filter_map(|(_, h)| h[slot])
                        .map(|h| g[h - 1][r])
                        .fold(g[g.len() - 1][r], f64::max);
                    best * t as f64
                })
                .sum();
            SegPlan { seg, size, paths, nodes, ub }
        })
        .collect();
    let weight =
        |p: &SegPlan| p.paths.iter().map(|&(_, t)| t as f64).sum::<f64>() * inst.sizes[p.seg.rank.index()] as f64;
    plans.sort_by(|a, b| weight(b).total_cmp(&weight(a)).then(a.seg.tie_order(&b.seg)));
    (plans, node_ids)
}

/// Maximizes the objective over feasible placements by depth-first branch
/// and bound. Stops after `budget` search nodes with the best placement found.
pub fn solve_exact(inst: &BipInstance, budget: u64) -> Result<PlacementSolution, ClassicError> {
    let (plans, node_ids) = build_plans(inst);
    let mut suffix_ub = vec![0.0; plans.len() + 1];
    for i in (0..plans.len()).rev() {
        suffix_ub[i] = suffix_ub[i + 1] + plans[i].ub;
    }
    let seg_index = plans.iter().enumerate().map(|(i, p)| (p.seg, i)).collect();
    let remaining = node_ids.iter().map(|&n| inst.capacity(n)).collect();
    let chosen = plans.iter().map(|p| vec![false; p.nodes.len()]).collect();
    let hops = plans.iter().map(|p| vec![0; p.paths.len()]).collect();
    let complete = vec![false; plans.len()];
    let mut st = Search { inst, plans, seg_index, node_ids, remaining, chosen, hops, complete, suffix_ub, value: 0.0 };

    // Decision variables in order; segments without candidates complete at once.
    let vars: Vec<(usize, usize)> =
        st.plans.iter().enumerate().flat_map(|(si, p)| (0..p.nodes.len()).map(move |ni| (si, ni))).collect();
    for si in 0..st.plans.len() {
        if st.plans[si].nodes.is_empty() {
            let ok = st.finish_segment(si);
            debug_assert!(ok, "uncached segments never break the popularity order");
        }
    }

    // The empty placement is always feasible.
    let mut best_value = inst.objective_unchecked(&Placement::new());
    let mut best: Vec<Vec<bool>> = st.chosen.clone();
    // Per depth: next branch to try (0 = place, 1 = skip, 2 = exhausted) and
    // whether the assignment at that depth completed its segment.
    let mut phase = vec![0u8; vars.len()];
    let mut finished = vec![false; vars.len()];
    let mut nodes_used: u64 = 0;
    let mut exhausted = false;
    let mut depth = 0usize;

    if vars.is_empty() {
        return Ok(solution_from(&st, &best, true));
    }
    loop {
        if depth == vars.len() {
            if st.value > best_value {
                best_value = st.value;
                best.clone_from(&st.chosen);
            }
            depth -= 1;
            undo(&mut st, &vars, depth, &mut finished);
            continue;
        }
        let (si, ni) = vars[depth];
        if phase[depth] >= 2 {
            phase[depth] = 0;
            if depth == 0 {
                break;
            }
            depth -= 1;
            undo(&mut st, &vars, depth, &mut finished);
            continue;
        }
        let place = phase[depth] == 0;
        phase[depth] += 1;
        if place && !st.may_place(si, ni) {
            continue;
        }
        nodes_used += 1;
        if nodes_used > budget {
            exhausted = true;
            break;
        }
        st.chosen[si][ni] = place;
        if place {
            st.remaining[st.plans[si].nodes[ni].0] -= st.plans[si].size;
        }
        let last = ni + 1 == st.plans[si].nodes.len();
        if last {
            if !st.finish_segment(si) {
                revert_choice(&mut st, si, ni);
                continue;
            }
            finished[depth] = true;
        }
        if st.bound(si, ni + 1) <= best_value {
            undo(&mut st, &vars, depth, &mut finished);
            continue;
        }
        depth += 1;
    }

    let sol = solution_from(&st, &best, !exhausted);
    if exhausted {
        return Err(ClassicError::BudgetExceeded { incumbent: sol });
    }
    Ok(sol)
}

fn revert_choice(st: &mut Search<'_>, si: usize, ni: usize) {
    if st.chosen[si][ni] {
        st.remaining[st.plans[si].nodes[ni].0] += st.plans[si].size;
        st.chosen[si][ni] = false;
    }
}

fn undo(st: &mut Search<'_>, vars: &[(usize, usize)], depth: usize, finished: &mut [bool]) {
    let (si, ni) = vars[depth];
    if finished[depth] {
        st.unfinish_segment(si);
        finished[depth] = false;
    }
    revert_choice(st, si, ni);
}

fn solution_from(st: &Search<'_>, chosen: &[Vec<bool>], optimal: bool) -> PlacementSolution {
    let mut placement = Placement::new();
    for (plan, picks) in st.plans.iter().zip(chosen) {
        for ((node, _), &on) in plan.nodes.iter().zip(picks) {
            if on {
                placement.insert(st.node_ids[*node], plan.seg);
            }
        }
    }
    let objective = st.inst.objective_unchecked(&placement);
    PlacementSolution { placement, objective, optimal }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicParams {
    pub eta: f64,
    /// Search-node budget per solve.
    pub budget: u64,
    /// Maximum number of solves.
    pub max_iters: usize,
    /// Relative objective change treated as settled.
    pub tolerance: f64,
    /// Delivery deadline for ripple bitrates, seconds; usually the segment duration.
    pub deadline: f64,
    pub min_samples: u64,
}

impl ClassicParams {
    pub fn new(eta: f64, deadline: f64) -> Self {
        ClassicParams {
            eta,
            budget: DEFAULT_BUDGET,
            max_iters: 10,
            tolerance: 0.01,
            deadline,
            min_samples: MIN_DELAY_SAMPLES,
        }
    }
}

fn settled(prev: f64, cur: f64, tolerance: f64) -> bool {
    let scale = prev.abs().max(cur.abs());
    scale == 0.0 || (cur - prev).abs() / scale < tolerance
}

/// Ripple bitrates for each edge over its longest forwarding path.
pub fn ripple_table(
    topology: &Topology,
    catalog: &Catalog,
    stats: &StatsLedger,
    deadline: f64,
    min_samples: u64,
) -> Result<RippleBitrateTable, TopologyError> {
    let mut spans = Vec::new();
    for edge in topology.edges() {
        let mut len = 0;
        for p in topology.producers() {
            len = len.max(topology.shortest_delay_path(edge, p)?.len());
        }
        spans.push((edge, len));
    }
    Ok(RippleBitrateTable::build(stats, catalog, spans, deadline, min_samples))
}

/// Alternates simulation and exact placement until the objective settles.
///
/// The first solve uses statistics gathered with empty stores. Each later
/// solve uses statistics from simulating the previous placement over the
/// same schedule. A single requested solve is returned as is.
pub fn iterate_placement(
    topology: &Topology,
    catalog: &Catalog,
    schedule: &SessionSchedule,
    sim: &SimConfig,
    params: &ClassicParams,
) -> Result<IterationReport, ClassicError> {
    if params.max_iters == 0 {
        return Err(ClassicError::InvalidInstance("at least one solve is required"));
    }
    let mut stats = run_simulation(topology, catalog, &CachePolicy::NoCache, schedule, sim)?.stats;
    let mut objectives = Vec::new();
    let mut budget_hit = false;
    loop {
        let rb = ripple_table(topology, catalog, &stats, params.deadline, params.min_samples)?;
        let inst = BipInstance::from_stats(topology, catalog, &stats, &rb, params.eta)?;
        let solution = match solve_exact(&inst, params.budget) {
            Ok(s) => s,
            Err(ClassicError::BudgetExceeded { incumbent }) => {
                budget_hit = true;
                incumbent
            }
            Err(e) => return Err(e),
        };
        objectives.push(solution.objective);
        let n = objectives.len();
        let converged = n >= 2 && settled(objectives[n - 2], objectives[n - 1], params.tolerance);
        if converged || n >= params.max_iters {
            let report = IterationReport { solution, objectives, converged, budget_hit, ripple_bitrates: rb };
            if converged || params.max_iters == 1 {
                return Ok(report);
            }
            return Err(ClassicError::NonConvergence { report: Box::new(report) });
        }
        let policy = CachePolicy::Static(solution.placement);
        stats = run_simulation(topology, catalog, &policy, schedule, sim)?.stats;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(f: u32, k: u32, b: u8) -> SegmentId {
        SegmentId::new(f, k, BitrateRank::new(b))
    }

    /// Edge 1 in front of producer 0; two ranks sized 1 and 2.
    fn two_hop(theta: &[(SegmentId, u64)], gamma: [[f64; 2]; 2], cap: u64) -> BipInstance {
        BipInstance::new(
            vec![BipPath { nodes: vec![NodeId(1), NodeId(0)] }],
            vec![theta.iter().copied().collect()],
            vec![gamma.iter().map(|g| g.to_vec()).collect()],
            [(NodeId(1), cap)].into_iter().collect(),
            vec![1, 2],
        )
        .unwrap()
    }

    #[test]
    fn prefix_or() {
        assert_eq!(delta_from_x(&[false, true, false, true]), vec![false, true, true, true]);
        assert_eq!(delta_from_x(&[false; 3]), vec![false; 3]);
        assert_eq!(delta_from_x(&[true, false, false]), vec![true; 3]);
    }

    #[test]
    fn objective_single_hit() {
        let s = seg(1, 1, 2);
        let inst = two_hop(&[(s, 5)], [[1.0, 2.5], [1.0, 1.0]], 10);
        let x: Placement = [(NodeId(1), s)].into_iter().collect();
        assert_eq!(inst.objective_value(&x).unwrap(), 12.5);
        assert_eq!(inst.objective_value(&Placement::new()).unwrap(), 5.0);
    }

    #[test]
    fn duplicate_upstream_copy_adds_nothing() {
        let s = seg(1, 1, 1);
        let inst = BipInstance::new(
            vec![BipPath { nodes: vec![NodeId(1), NodeId(2), NodeId(0)] }],
            vec![[(s, 3)].into_iter().collect()],
            vec![vec![vec![4.0], vec![2.0], vec![1.0]]],
            [(NodeId(1), 5), (NodeId(2), 5)].into_iter().collect(),
            vec![1],
        )
        .unwrap();
        let one: Placement = [(NodeId(1), s)].into_iter().collect();
        let both: Placement = [(NodeId(1), s), (NodeId(2), s)].into_iter().collect();
        assert_eq!(inst.objective_value(&one).unwrap(), inst.objective_value(&both).unwrap());
    }

    #[test]
    fn feasibility_checks() {
        let (a, b) = (seg(1, 1, 1), seg(2, 1, 1));
        let inst = two_hop(&[(a, 5), (b, 3)], [[2.0, 3.0], [1.0, 1.0]], 1);
        assert!(inst.feasible(&Placement::new()).is_feasible());
        let both: Placement = [(NodeId(1), a), (NodeId(1), b)].into_iter().collect();
        let r = inst.feasible(&both);
        assert_eq!(r.capacity.len(), 1);
        assert!(matches!(inst.objective_value(&both), Err(ClassicError::InfeasibleX(_))));
    }

    #[test]
    fn less_popular_cannot_sit_closer() {
        let (hot, cold) = (seg(1, 1, 1), seg(2, 1, 1));
        let nodes = vec![NodeId(1), NodeId(2), NodeId(3), NodeId(0)];
        let inst = BipInstance::new(
            vec![BipPath { nodes }],
            vec![[(hot, 9), (cold, 2)].into_iter().collect()],
            vec![vec![vec![3.0], vec![2.0], vec![1.5], vec![1.0]]],
            (1..=3).map(|i| (NodeId(i), 10)).collect(),
            vec![1],
        )
        .unwrap();
        let bad: Placement = [(NodeId(3), hot), (NodeId(1), cold)].into_iter().collect();
        let r = inst.feasible(&bad);
        assert_eq!(r.popularity, vec![PopularityViolation { path: 0, more_popular: hot, less_popular: cold }]);
        let swapped: Placement = [(NodeId(1), hot), (NodeId(3), cold)].into_iter().collect();
        assert!(inst.feasible(&swapped).is_feasible());
    }

    #[test]
    fn picks_larger_reward() {
        // Rewards at the edge: 12.5 vs 8; only one fits.
        let (a, b) = (seg(1, 1, 1), seg(2, 1, 1));
        let inst = two_hop(&[(a, 5), (b, 4)], [[2.5, 0.0], [0.0, 0.0]], 1);
        let sol = solve_exact(&inst, DEFAULT_BUDGET).unwrap();
        assert!(sol.optimal);
        assert!(sol.placement.contains(NodeId(1), a));
        assert_eq!(sol.objective, 12.5);
    }

    #[test]
    fn zero_capacity_is_producer_only() {
        let s = seg(1, 1, 1);
        let inst = two_hop(&[(s, 4)], [[3.0, 3.0], [1.0, 1.0]], 0);
        let sol = solve_exact(&inst, DEFAULT_BUDGET).unwrap();
        assert!(sol.placement.is_empty());
        assert_eq!(sol.objective, 4.0);
    }

    #[test]
    fn budget_returns_incumbent() {
        let segs: Vec<(SegmentId, u64)> = (1..=8).map(|f| (seg(f, 1, 1), 10 - f as u64)).collect();
        let inst = two_hop(&segs, [[2.0, 2.0], [1.0, 1.0]], 4);
        match solve_exact(&inst, 3) {
            Err(ClassicError::BudgetExceeded { incumbent }) => {
                assert!(!incumbent.optimal);
                assert!(inst.feasible(&incumbent.placement).is_feasible());
            }
            other => panic!("expected budget stop, got {other:?}"),
        }
    }

    #[test]
    fn settle_rule() {
        assert!(settled(100.0, 100.5, 0.01));
        assert!(!settled(100.0, 102.0, 0.01));
        assert!(settled(0.0, 0.0, 0.01));
    }
}
