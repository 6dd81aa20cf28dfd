//! Discrete-event delivery of segment requests over the cache network.
//!
//! Transfers are fluid flows sharing directed link capacity max-min fairly;
//! rates are recomputed whenever a flow starts or finishes.

pub mod fair;
pub mod stats;
pub mod store;

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptation::{AdaptationParams, ClientState};
use crate::baselines::{probcache_probability, OnlinePolicy};
use crate::catalog::{BitrateRank, Catalog, SegmentId, Session, SessionSchedule};
use crate::placement::Placement;
use crate::topology::{NodeId, Path, Topology, TopologyError};

use fair::fair_share_rates;
use stats::StatsLedger;
use store::{cs_lookup_insert, ContentStore, Eviction};

/// How router stores behave during a run.
#[derive(Clone, Debug, PartialEq)]
pub enum CachePolicy {
    /// Stores stay empty; every request is served by its producer.
    NoCache,
    /// Stores fill on the data return path.
    Online(OnlinePolicy),
    /// Stores hold a fixed placement and never change.
    Static(Placement),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Seeds the stream used by probabilistic caching decisions.
    pub seed: u64,
    /// Consumers `0..consumers`, attached round-robin to edge routers.
    pub consumers: u32,
    pub adaptation: AdaptationParams,
    /// Consumer access link rate, bits/second.
    pub access_bandwidth: f64,
    /// Consumer access link propagation delay, seconds.
    pub access_delay: f64,
    /// Simulated time at which unfinished sessions are aborted.
    pub stop_time: f64,
    /// Keep a per-router lookup log.
    pub record_hits: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            consumers: 1,
            adaptation: AdaptationParams::default(),
            access_bandwidth: 20e6,
            access_delay: 0.001,
            stop_time: f64::INFINITY,
            record_hits: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(&'static str),
    #[error("placement exceeds the store of router {node}: {used} > {capacity} bytes")]
    PlacementOverCapacity { node: NodeId, used: u64, capacity: u64 },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// One delivered segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentRecord {
    /// Time the last byte reached the consumer.
    pub time: f64,
    pub requested_at: f64,
    pub segment: u32,
    pub rank: BitrateRank,
    /// 1-based hop that served the request; the path length means the producer.
    pub hit_hop: usize,
    pub delay: f64,
    pub stall: f64,
    /// Buffered media after the segment was added, seconds.
    pub buffer_after: f64,
}

/// A request still in flight when the run stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbortRecord {
    pub time: f64,
    pub segment: u32,
    pub rank: BitrateRank,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionTrace {
    pub session: Session,
    pub edge: NodeId,
    pub path_len: usize,
    pub records: Vec<SegmentRecord>,
    pub rebuffer_intervals: Vec<(f64, f64)>,
    pub completed: bool,
    /// Set when the run stopped with a request outstanding.
    pub aborted: Option<AbortRecord>,
    /// Seconds of media delivered to the client.
    pub played: f64,
}

impl SessionTrace {
    pub fn rebuffer_time(&self) -> f64 {
        self.rebuffer_intervals.iter().fold(0.0, |t, (a, b)| t + (b - a))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitEvent {
    pub time: f64,
    pub node: NodeId,
    pub segment: SegmentId,
    pub hit: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub requests_issued: u64,
    pub deliveries: u64,
    pub aborts: u64,
    /// Requests served by a router store rather than a producer.
    pub cache_hits: u64,
    pub capacity_violations: u64,
    pub events: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceOutput {
    pub sessions: Vec<SessionTrace>,
    pub hits: Vec<HitEvent>,
    pub stats: StatsLedger,
    pub counters: Counters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EventKind {
    Start(usize),
    Request(usize),
    FlowStart(usize),
    FlowCheck(u64),
    Deliver(usize),
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Outstanding {
    segment: SegmentId,
    requested_at: f64,
    hop: usize,
}

struct SessionRun {
    edge: NodeId,
    path: usize,
    client: ClientState,
    next_k: u32,
    outstanding: Option<Outstanding>,
    trace: SessionTrace,
}

struct Flow {
    session: usize,
    links: Vec<usize>,
    remaining: f64,
    rate: f64,
}

/// Per-path lookups precomputed once.
struct PathInfo {
    path: Path,
    /// `directed[j]`: directed link index carrying data from hop j+2 to hop j+1.
    directed: Vec<usize>,
    /// `one_way[h]`: propagation delay between the consumer and hop h (index 0 unused).
    one_way: Vec<f64>,
}

struct Engine<'a> {
    catalog: &'a Catalog,
    cfg: &'a SimConfig,
    online: Option<OnlinePolicy>,
    stores: BTreeMap<NodeId, ContentStore>,
    paths: Vec<PathInfo>,
    capacity: Vec<f64>,
    access_base: usize,
    runs: Vec<SessionRun>,
    heap: BinaryHeap<Event>,
    seq: u64,
    now: f64,
    flows: BTreeMap<usize, Flow>,
    last_advance: f64,
    version: u64,
    next_done: Option<usize>,
    rng: ChaCha8Rng,
    stats: StatsLedger,
    hits: Vec<HitEvent>,
    counters: Counters,
}

/// Bits left below this count as delivered (float slack of the fluid model).
const DONE_BITS: f64 = 1e-2;

impl<'a> Engine<'a> {
    fn push(&mut self, time: f64, kind: EventKind) {
        debug_assert!(time >= self.now);
        self.seq += 1;
        self.heap.push(Event { time, seq: self.seq, kind });
    }

    fn advance(&mut self) {
        let dt = self.now - self.last_advance;
        if dt > 0.0 {
            for f in self.flows.values_mut() {
                f.remaining -= f.rate * dt;
            }
        }
        self.last_advance = self.now;
    }

    fn reallocate(&mut self) {
        self.version += 1;
        self.next_done = None;
        if self.flows.is_empty() {
            return;
        }
        // Compact to the links in use so the allocation scales with active flows.
        let mut local: BTreeMap<usize, usize> = BTreeMap::new();
        let mut caps = Vec::new();
        let flows: Vec<Vec<usize>> = self
            .flows
            .values()
            .map(|f| {
                f.links
                    .iter()
                    .map(|&l| {
                        *local.entry(l).or_insert_with(|| {
                            caps.push(self.capacity[l]);
                            caps.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let rates = fair_share_rates(&flows, &caps);
        let mut best: Option<(f64, usize)> = None;
        for ((&id, f), r) in self.flows.iter_mut().zip(rates) {
            f.rate = r;
            let t = f.remaining.max(0.0) / r;
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, id));
            }
        }
        let (t, id) = best.expect("flows are non-empty");
        self.next_done = Some(id);
        let v = self.version;
        self.push(self.now + t, EventKind::FlowCheck(v));
    }

    fn start(&mut self, s: usize) {
        self.request(s);
    }

    fn request(&mut self, s: usize) {
        let k = self.runs[s].next_k;
        let file = self.runs[s].trace.session.file;
        let rank = self.runs[s].client.decide(&self.cfg.adaptation, self.catalog.ladder());
        let segment = SegmentId::new(file, k, rank);
        let edge = self.runs[s].edge;
        self.stats.record_request(edge, segment);
        self.counters.requests_issued += 1;

        let info = &self.paths[self.runs[s].path];
        let len = info.path.len();
        let mut hop = len;
        for i in 1..len {
            let node = info.path.hop(i);
            let hit = self.stores.get_mut(&node).is_some_and(|cs| cs.lookup(segment));
            if self.cfg.record_hits {
                self.hits.push(HitEvent { time: self.now, node, segment, hit });
            }
            if hit {
                hop = i;
                break;
            }
        }
        if hop < len {
            self.counters.cache_hits += 1;
        }
        let up = info.one_way[hop];
        self.runs[s].outstanding = Some(Outstanding { segment, requested_at: self.now, hop });
        self.push(self.now + up, EventKind::FlowStart(s));
    }

    fn flow_start(&mut self, s: usize) {
        let o = self.runs[s].outstanding.as_ref().expect("flow without request");
        let bits = self.catalog.segment_size(o.segment.rank) as f64 * 8.0;
        let info = &self.paths[self.runs[s].path];
        let mut links: Vec<usize> = info.directed[..o.hop - 1].to_vec();
        links.push(self.access_base + self.runs[s].trace.session.consumer.0 as usize);
        self.advance();
        if bits <= 0.0 {
            self.finish_flow(s);
            return;
        }
        self.flows.insert(s, Flow { session: s, links, remaining: bits, rate: 0.0 });
        self.reallocate();
    }

    fn flow_check(&mut self, version: u64) {
        if version != self.version {
            return;
        }
        self.advance();
        let mut done: Vec<usize> =
            self.flows.iter().filter(|(_, f)| f.remaining <= DONE_BITS).map(|(&id, _)| id).collect();
        if let Some(id) = self.next_done {
            if !done.contains(&id) {
                done.push(id);
                done.sort_unstable();
            }
        }
        for id in done {
            let f = self.flows.remove(&id).expect("finished flow is active");
            self.finish_flow(f.session);
        }
        self.reallocate();
    }

    /// Last byte left the serving node: cache on the way down, then deliver.
    fn finish_flow(&mut self, s: usize) {
        let o = self.runs[s].outstanding.as_ref().expect("flow without request");
        let (segment, hop) = (o.segment, o.hop);
        let info = &self.paths[self.runs[s].path];
        let down = info.one_way[hop];
        if let Some(policy) = self.online {
            let size = self.catalog.segment_size(segment.rank);
            for i in (1..hop).rev() {
                let node = info.path.hop(i);
                let Some(cs) = self.stores.get_mut(&node) else { continue };
                match policy {
                    OnlinePolicy::Ce2(_) => {
                        cs_lookup_insert(cs, segment, size);
                    }
                    OnlinePolicy::ProbCache(params) => {
                        let p = probcache_probability(hop - i, hop, &params);
                        let draw: f64 = self.rng.random();
                        if draw < p && !cs.contains(&segment) {
                            cs.insert(segment, size);
                        }
                    }
                }
                if cs.occupancy() > cs.capacity() {
                    self.counters.capacity_violations += 1;
                }
            }
        }
        self.push(self.now + down, EventKind::Deliver(s));
    }

    fn deliver(&mut self, s: usize) {
        let duration = self.catalog.segment_duration();
        let segments = self.catalog.segments();
        let now = self.now;
        let run = &mut self.runs[s];
        let o = run.outstanding.take().expect("delivery without request");
        let delay = now - o.requested_at;
        let bits = self.catalog.segment_size(o.segment.rank) as f64 * 8.0;
        run.client.push_throughput(bits / delay, &self.cfg.adaptation);
        let stall = run.client.on_segment_done(o.requested_at, delay, duration);
        run.trace.records.push(SegmentRecord {
            time: now,
            requested_at: o.requested_at,
            segment: o.segment.segment,
            rank: o.segment.rank,
            hit_hop: o.hop,
            delay,
            stall,
            buffer_after: run.client.buffer,
        });
        run.trace.played += duration;
        self.stats.record_delivery(run.edge, o.hop, o.segment.rank, delay);
        self.counters.deliveries += 1;

        if o.segment.segment >= segments {
            run.trace.completed = true;
            return;
        }
        run.next_k = o.segment.segment + 1;
        let wait = run.client.pacing_wait(&self.cfg.adaptation, duration);
        run.client.drain(wait);
        self.push(now + wait, EventKind::Request(s));
    }
}

fn validate(topology: &Topology, catalog: &Catalog, sched: &SessionSchedule, cfg: &SimConfig) -> Result<(), SimError> {
    cfg.adaptation.validate().map_err(|_| SimError::Config("invalid adaptation parameters"))?;
    if !(cfg.access_bandwidth > 0.0) {
        return Err(SimError::Config("access bandwidth must be positive"));
    }
    if !(cfg.access_delay >= 0.0 && cfg.access_delay.is_finite()) {
        return Err(SimError::Config("access delay must be non-negative"));
    }
    if cfg.stop_time.is_nan() {
        return Err(SimError::Config("stop time is NaN"));
    }
    if topology.edges().is_empty() {
        return Err(SimError::Config("topology has no edge router"));
    }
    for s in sched.sessions() {
        if s.consumer.0 >= cfg.consumers {
            return Err(SimError::Config("session consumer outside the configured consumer count"));
        }
        if s.file == 0 || s.file > catalog.files() {
            return Err(SimError::Config("session file outside the catalog"));
        }
        if !(s.start >= 0.0 && s.start.is_finite()) {
            return Err(SimError::Config("session start must be finite and non-negative"));
        }
    }
    Ok(())
}

/// Runs every scheduled session to completion or until `cfg.stop_time`.
pub fn run_simulation(
    topology: &Topology,
    catalog: &Catalog,
    policy: &CachePolicy,
    sched: &SessionSchedule,
    cfg: &SimConfig,
) -> Result<TraceOutput, SimError> {
    validate(topology, catalog, sched, cfg)?;

    let mut stores = BTreeMap::new();
    let online = match policy {
        CachePolicy::NoCache => None,
        CachePolicy::Online(p) => {
            let eviction = match p {
                OnlinePolicy::Ce2(e) => *e,
                OnlinePolicy::ProbCache(_) => Eviction::Lru,
            };
            for r in topology.routers() {
                stores.insert(r, ContentStore::new(topology.capacity(r), eviction));
            }
            Some(*p)
        }
        CachePolicy::Static(placement) => {
            if let Some(v) = placement.capacity_violations(topology, catalog).first() {
                return Err(SimError::PlacementOverCapacity { node: v.node, used: v.used, capacity: v.capacity });
            }
            for r in topology.routers() {
                let segs = placement.at(r).map(|s| (s, catalog.segment_size(s.rank)));
                stores.insert(r, ContentStore::frozen(topology.capacity(r), segs));
            }
            None
        }
    };

    let links = topology.links();
    let mut capacity: Vec<f64> = links.iter().flat_map(|l| [l.bandwidth, l.bandwidth]).collect();
    let access_base = capacity.len();
    capacity.extend(core::iter::repeat_n(cfg.access_bandwidth, cfg.consumers as usize));

    let attach: BTreeMap<_, _> = topology.attach_consumers(cfg.consumers).into_iter().collect();
    let mut path_index: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    let mut paths = Vec::new();
    let mut runs = Vec::with_capacity(sched.len());
    for s in sched.sessions() {
        let edge = attach[&s.consumer];
        let producer = topology.producer_for_file(s.file);
        let idx = match path_index.get(&(edge, producer)) {
            Some(&i) => i,
            None => {
                let path = topology.shortest_delay_path(edge, producer)?;
                let nodes = path.nodes();
                let directed = path
                    .links()
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| if links[l].a == nodes[j + 1] { 2 * l } else { 2 * l + 1 })
                    .collect();
                let mut one_way = vec![0.0; path.len() + 1];
                one_way[1] = cfg.access_delay;
                for h in 2..=path.len() {
                    one_way[h] = one_way[h - 1] + links[path.links()[h - 2]].delay;
                }
                paths.push(PathInfo { path, directed, one_way });
                path_index.insert((edge, producer), paths.len() - 1);
                paths.len() - 1
            }
        };
        runs.push(SessionRun {
            edge,
            path: idx,
            client: ClientState::new(),
            next_k: 1,
            outstanding: None,
            trace: SessionTrace {
                session: *s,
                edge,
                path_len: paths[idx].path.len(),
                records: Vec::new(),
                rebuffer_intervals: Vec::new(),
                completed: false,
                aborted: None,
                played: 0.0,
            },
        });
    }

    let mut eng = Engine {
        catalog,
        cfg,
        online,
        stores,
        paths,
        capacity,
        access_base,
        runs,
        heap: BinaryHeap::new(),
        seq: 0,
        now: 0.0,
        flows: BTreeMap::new(),
        last_advance: 0.0,
        version: 0,
        next_done: None,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        stats: StatsLedger::new(),
        hits: Vec::new(),
        counters: Counters::default(),
    };
    for (i, s) in sched.sessions().iter().enumerate() {
        eng.push(s.start, EventKind::Start(i));
    }

    while let Some(ev) = eng.heap.pop() {
        if ev.time > cfg.stop_time {
            break;
        }
        debug_assert!(ev.time >= eng.now, "events out of order");
        eng.now = ev.time;
        eng.counters.events += 1;
        match ev.kind {
            EventKind::Start(s) => eng.start(s),
            EventKind::Request(s) => eng.request(s),
            EventKind::FlowStart(s) => eng.flow_start(s),
            EventKind::FlowCheck(v) => eng.flow_check(v),
            EventKind::Deliver(s) => eng.deliver(s),
        }
    }

    let stop = if cfg.stop_time.is_finite() { cfg.stop_time } else { eng.now };
    let mut sessions = Vec::with_capacity(eng.runs.len());
    for mut run in eng.runs {
        if let Some(o) = run.outstanding.take() {
            run.trace.aborted = Some(AbortRecord { time: stop, segment: o.segment.segment, rank: o.segment.rank });
            eng.counters.aborts += 1;
        }
        run.trace.rebuffer_intervals = run.client.rebuffer_intervals;
        sessions.push(run.trace);
    }
    Ok(TraceOutput { sessions, hits: eng.hits, stats: eng.stats, counters: eng.counters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ConsumerId;
    use crate::topology::{build_topology, Link, Node, Role, TopologySpec};

    fn line(n_routers: u32, capacity: u64) -> Topology {
        // Producer 0, then routers 1..=n, edge is the last one.
        let mut nodes = vec![Node { id: NodeId(0), role: Role::Producer, cache_capacity: 0 }];
        let mut links = Vec::new();
        for i in 1..=n_routers {
            let role = if i == n_routers { Role::Edge } else { Role::Intermediate };
            nodes.push(Node { id: NodeId(i), role, cache_capacity: capacity });
            links.push(Link { a: NodeId(i - 1), b: NodeId(i), bandwidth: 20e6, delay: 0.005 });
        }
        build_topology(TopologySpec { nodes, links }).unwrap()
    }

    fn session(consumer: u32, start: f64, file: u32) -> Session {
        Session { id: 0, consumer: ConsumerId(consumer), start, file }
    }

    fn catalog() -> Catalog {
        Catalog::new(3, 5, vec![1e6, 2.5e6, 5e6, 8e6], 4.0).unwrap()
    }

    #[test]
    fn empty_schedule() {
        let out = run_simulation(
            &line(2, 0),
            &catalog(),
            &CachePolicy::Online(OnlinePolicy::Ce2(Eviction::Lru)),
            &SessionSchedule::default(),
            &SimConfig::default(),
        )
        .unwrap();
        assert!(out.sessions.is_empty());
        assert_eq!(out.counters, Counters::default());
    }

    #[test]
    fn cold_start_all_from_producer() {
        let sched = SessionSchedule::from_sessions(vec![session(0, 0.0, 1)]);
        let out = run_simulation(
            &line(3, 100_000_000),
            &catalog(),
            &CachePolicy::Online(OnlinePolicy::Ce2(Eviction::Lru)),
            &sched,
            &SimConfig::default(),
        )
        .unwrap();
        let t = &out.sessions[0];
        assert!(t.completed);
        assert_eq!(t.records.len(), 5);
        assert!(t.records.iter().all(|r| r.hit_hop == 4));
        assert_eq!(out.counters.cache_hits, 0);
        assert_eq!(out.counters.requests_issued, out.counters.deliveries);
    }

    #[test]
    fn second_consumer_hits_at_edge() {
        // Two consumers on one edge, the second starts well after the first finished.
        let sched = SessionSchedule::from_sessions(vec![session(0, 0.0, 1), session(1, 500.0, 1)]);
        let cfg = SimConfig { consumers: 2, ..Default::default() };
        let out = run_simulation(
            &line(2, 100_000_000),
            &catalog(),
            &CachePolicy::Online(OnlinePolicy::Ce2(Eviction::Lru)),
            &sched,
            &cfg,
        )
        .unwrap();
        let first: Vec<_> = out.sessions[0].records.iter().map(|r| (r.segment, r.rank)).collect();
        for r in &out.sessions[1].records {
            if first.contains(&(r.segment, r.rank)) {
                assert_eq!(r.hit_hop, 1, "overlapping segment {r:?} missed the edge");
            }
        }
        assert!(out.counters.cache_hits > 0);
    }

    #[test]
    fn no_cache_policy_never_hits() {
        let sched = SessionSchedule::from_sessions(vec![session(0, 0.0, 1), session(0, 300.0, 1)]);
        let out =
            run_simulation(&line(2, 100_000_000), &catalog(), &CachePolicy::NoCache, &sched, &SimConfig::default())
                .unwrap();
        assert_eq!(out.counters.cache_hits, 0);
    }

    #[test]
    fn static_placement_serves_from_store() {
        let cat = catalog();
        let placement: Placement = cat.all_segments().filter(|s| s.file == 1).map(|s| (NodeId(2), s)).collect();
        let sched = SessionSchedule::from_sessions(vec![session(0, 0.0, 1)]);
        let out = run_simulation(
            &line(2, cat.total_bytes()),
            &cat,
            &CachePolicy::Static(placement.clone()),
            &sched,
            &SimConfig::default(),
        )
        .unwrap();
        assert!(out.sessions[0].records.iter().all(|r| r.hit_hop == 1));
        let err = run_simulation(&line(2, 10), &cat, &CachePolicy::Static(placement), &sched, &SimConfig::default());
        assert!(matches!(err, Err(SimError::PlacementOverCapacity { .. })));
    }

    #[test]
    fn abort_on_stop() {
        let sched = SessionSchedule::from_sessions(vec![session(0, 0.0, 1)]);
        let cfg = SimConfig { stop_time: 1.0, ..Default::default() };
        let out = run_simulation(&line(2, 0), &catalog(), &CachePolicy::NoCache, &sched, &cfg).unwrap();
        assert!(!out.sessions[0].completed);
        assert!(out.sessions[0].aborted.is_some());
        assert_eq!(out.counters.requests_issued, out.counters.deliveries + out.counters.aborts);
    }

    #[test]
    fn fast_network_settles_on_top_rank() {
        let topo = build_topology(TopologySpec {
            nodes: vec![
                Node { id: NodeId(0), role: Role::Producer, cache_capacity: 0 },
                Node { id: NodeId(1), role: Role::Edge, cache_capacity: 0 },
            ],
            links: vec![Link { a: NodeId(0), b: NodeId(1), bandwidth: 1e12, delay: 0.0 }],
        })
        .unwrap();
        let cat = Catalog::new(1, 40, vec![1e6, 2.5e6, 5e6, 8e6], 4.0).unwrap();
        let sched = SessionSchedule::from_sessions(vec![session(0, 0.0, 1)]);
        let cfg = SimConfig { access_bandwidth: 1e12, access_delay: 0.0, ..Default::default() };
        let out = run_simulation(&topo, &cat, &CachePolicy::NoCache, &sched, &cfg).unwrap();
        let ranks: Vec<u8> = out.sessions[0].records.iter().map(|r| r.rank.get()).collect();
        let first_top = ranks.iter().position(|&r| r == 4).expect("reaches the top rank");
        assert!(ranks[first_top..].iter().all(|&r| r == 4), "{ranks:?}");
        assert_eq!(out.sessions[0].rebuffer_time(), 0.0);
    }

    #[test]
    fn contention_slows_delivery() {
        let topo = line(2, 0);
        let cat = catalog();
        let solo = SessionSchedule::from_sessions(vec![session(0, 0.0, 1)]);
        let cfg = SimConfig { consumers: 4, ..Default::default() };
        let a = run_simulation(&topo, &cat, &CachePolicy::NoCache, &solo, &cfg).unwrap();
        let crowd = SessionSchedule::from_sessions((0..4).map(|c| session(c, 0.0, 1)).collect());
        let b = run_simulation(&topo, &cat, &CachePolicy::NoCache, &crowd, &cfg).unwrap();
        let d_solo = a.sessions[0].records[0].delay;
        let d_crowd = b.sessions[0].records[0].delay;
        // Four equal flows share the 20 Mbps bottleneck.
        assert!(d_crowd > 3.0 * (d_solo - 0.02), "{d_solo} vs {d_crowd}");
    }

    #[test]
    fn deterministic_reruns() {
        let cat = catalog();
        let topo = line(3, 3_000_000);
        let sched = SessionSchedule::from_sessions((0..6).map(|c| session(c, c as f64 * 7.0, c % 3 + 1)).collect());
        let cfg = SimConfig { consumers: 6, seed: 9, record_hits: true, ..Default::default() };
        let policy = CachePolicy::Online(OnlinePolicy::ProbCache(Default::default()));
        let a = run_simulation(&topo, &cat, &policy, &sched, &cfg).unwrap();
        let b = run_simulation(&topo, &cat, &policy, &sched, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counters.capacity_violations, 0);
    }

    #[test]
    fn rejects_unknown_consumer() {
        let sched = SessionSchedule::from_sessions(vec![session(5, 0.0, 1)]);
        let err = run_simulation(&line(2, 0), &catalog(), &CachePolicy::NoCache, &sched, &SimConfig::default());
        assert!(matches!(err, Err(SimError::Config(_))));
    }
}
