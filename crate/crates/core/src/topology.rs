//! Cache network graph, least-delay forwarding paths and topology generators.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::ConsumerId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Producer,
    Edge,
    Intermediate,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Producer => "producer",
            Role::Edge => "edge",
            Role::Intermediate => "intermediate",
        }
    }
}

impl core::str::FromStr for Role {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "producer" => Ok(Role::Producer),
            "edge" => Ok(Role::Edge),
            "intermediate" | "router" => Ok(Role::Intermediate),
            _ => Err(TopologyError::InvalidParam("unknown node role")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    /// Content store size in bytes. Ignored for producers, which hold everything.
    pub cache_capacity: u64,
}

/// Undirected link. Bandwidth in bits/second, delay in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth: f64,
    pub delay: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopologySpec {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("link references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid link {0} - {1}: {2}")]
    InvalidLink(NodeId, NodeId, &'static str),
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("topology has no producer")]
    MissingProducer,
    #[error("no path from {0} to {1}")]
    NoPath(NodeId, NodeId),
    #[error("node {0} does not have the required role")]
    WrongRole(NodeId),
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
}

/// Forwarding path `[d, p]`: routers from edge `d` (hop 1) to producer `p` (hop L).
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    nodes: Vec<NodeId>,
    /// `links[j]` joins `nodes[j]` and `nodes[j + 1]`.
    links: Vec<usize>,
    delay_ns: u64,
}

impl Path {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[usize] {
        &self.links
    }

    /// Number of routers on the path, producer included.
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
        *self.nodes.last().expect("paths are never empty")
    }

    /// Router at 1-based hop `i`.
    pub fn hop(&self, i: usize) -> NodeId {
        self.nodes[i - 1]
    }

    /// 1-based hop of `node` on this path.
    pub fn hop_of(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node).map(|i| i + 1)
    }

    /// Total propagation delay in seconds.
    pub fn delay(&self) -> f64 {
        self.delay_ns as f64 * 1e-9
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    index: BTreeMap<NodeId, usize>,
    /// Per node index: (neighbour index, link index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

fn delay_ns(seconds: f64) -> u64 {
    libm::round(seconds * 1e9) as u64
}

/// Validates a node/link description into a connected topology.
pub fn build_topology(spec: TopologySpec) -> Result<Topology, TopologyError> {
    let mut nodes = spec.nodes;
    nodes.sort_by_key(|n| n.id);
    let mut index = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if index.insert(n.id, i).is_some() {
            return Err(TopologyError::DuplicateNode(n.id));
        }
    }
    if !nodes.iter().any(|n| n.role == Role::Producer) {
        return Err(TopologyError::MissingProducer);
    }
    let mut adjacency = vec![Vec::new(); nodes.len()];
    let mut seen = BTreeSet::new();
    for (li, link) in spec.links.iter().enumerate() {
        let a = *index.get(&link.a).ok_or(TopologyError::UnknownNode(link.a))?;
        let b = *index.get(&link.b).ok_or(TopologyError::UnknownNode(link.b))?;
        if a == b {
            return Err(TopologyError::InvalidLink(link.a, link.b, "self-loop"));
        }
        if !(link.bandwidth > 0.0) || !link.bandwidth.is_finite() {
            return Err(TopologyError::InvalidLink(link.a, link.b, "bandwidth must be positive"));
        }
        if !(link.delay >= 0.0) || !link.delay.is_finite() {
            return Err(TopologyError::InvalidLink(link.a, link.b, "delay must be non-negative"));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(TopologyError::InvalidLink(link.a, link.b, "parallel link"));
        }
        adjacency[a].push((b, li));
        adjacency[b].push((a, li));
    }
    let topo = Topology { nodes, links: spec.links, index, adjacency };
    if !topo.is_connected() {
        return Err(TopologyError::DisconnectedGraph);
    }
    Ok(topo)
}

impl Topology {
    /// Nodes sorted by id.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn role(&self, id: NodeId) -> Option<Role> {
        self.node(id).map(|n| n.role)
    }

    fn ids_with(&self, role: Role) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.role == role).map(|n| n.id).collect()
    }

    pub fn producers(&self) -> Vec<NodeId> {
        self.ids_with(Role::Producer)
    }

    pub fn edges(&self) -> Vec<NodeId> {
        self.ids_with(Role::Edge)
    }

    /// Every node that owns a content store (all but producers).
    pub fn routers(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.role != Role::Producer).map(|n| n.id).collect()
    }

    /// Store size of `id`; zero for producers, which only serve their own files.
    pub fn capacity(&self, id: NodeId) -> u64 {
        self.node(id).filter(|n| n.role != Role::Producer).map_or(0, |n| n.cache_capacity)
    }

    /// Returns a copy with every router store set to `bytes`.
    pub fn with_uniform_capacity(&self, bytes: u64) -> Topology {
        let mut t = self.clone();
        for n in t.nodes.iter_mut().filter(|n| n.role != Role::Producer) {
            n.cache_capacity = bytes;
        }
        t
    }

    /// Producer hosting `file`: files are spread round-robin over producers in id order.
    pub fn producer_for_file(&self, file: u32) -> NodeId {
        let producers = self.producers();
        producers[(file as usize - 1) % producers.len()]
    }

    /// Attaches `count` consumers round-robin to edge routers in id order.
    pub fn attach_consumers(&self, count: u32) -> Vec<(ConsumerId, NodeId)> {
        let edges = self.edges();
        if edges.is_empty() {
            return Vec::new();
        }
        (0..count).map(|c| (ConsumerId(c), edges[c as usize % edges.len()])).collect()
    }

    fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Least propagation-delay path from edge `d` to producer `p`. Equal-delay
    /// routes resolve to the lexicographically smallest node-id sequence.
    pub fn shortest_delay_path(&self, d: NodeId, p: NodeId) -> Result<Path, TopologyError> {
        let src = *self.index.get(&d).ok_or(TopologyError::UnknownNode(d))?;
        let dst = *self.index.get(&p).ok_or(TopologyError::UnknownNode(p))?;
        if self.nodes[src].role != Role::Edge {
            return Err(TopologyError::WrongRole(d));
        }
        if self.nodes[dst].role != Role::Producer {
            return Err(TopologyError::WrongRole(p));
        }
        // Delays are compared as integer nanoseconds so equal routes tie exactly.
        // Labels carry the whole route; the lexicographically smallest
        // shortest route to a node extends to the smallest one to its neighbours.
        let n = self.nodes.len();
        let mut best: Vec<Option<(u64, Vec<u32>, Vec<usize>)>> = vec![None; n];
        let mut done = vec![false; n];
        best[src] = Some((0, vec![self.nodes[src].id.0], Vec::new()));
        loop {
            let mut pick: Option<usize> = None;
            for u in 0..n {
                if done[u] {
                    continue;
                }
                if let Some((du, ru, _)) = &best[u] {
                    let better = match pick {
                        None => true,
                        Some(q) => {
                            let (dq, rq, _) = best[q].as_ref().unwrap();
                            (du, ru) < (dq, rq)
                        }
                    };
                    if better {
                        pick = Some(u);
                    }
                }
            }
            let Some(u) = pick else { break };
            done[u] = true;
            if u == dst {
                break;
            }
            let (du, ru, lu) = best[u].clone().unwrap();
            for &(v, li) in &self.adjacency[u] {
                if done[v] {
                    continue;
                }
                let dv = du + delay_ns(self.links[li].delay);
                let mut rv = ru.clone();
                rv.push(self.nodes[v].id.0);
                let improve = match &best[v] {
                    None => true,
                    Some((dold, rold, _)) => (dv, &rv) < (*dold, rold),
                };
                if improve {
                    let mut lv = lu.clone();
                    lv.push(li);
                    best[v] = Some((dv, rv, lv));
                }
            }
        }
        match best[dst].take() {
            Some((delay, route, links)) if done[dst] => {
                Ok(Path { nodes: route.into_iter().map(NodeId).collect(), links, delay_ns: delay })
            }
            _ => Err(TopologyError::NoPath(d, p)),
        }
    }

    /// All `(edge, producer)` forwarding paths, ordered by edge then producer id.
    pub fn forwarding_paths(&self) -> Result<Vec<Path>, TopologyError> {
        let producers = self.producers();
        let mut out = Vec::new();
        for d in self.edges() {
            for &p in &producers {
                out.push(self.shortest_delay_path(d, p)?);
            }
        }
        Ok(out)
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.index.get(&id).map_or(0, |&i| self.adjacency[i].len())
    }

    /// Every simple path from `d` to `p` with its delay in nanoseconds.
    /// Exponential; meant for small graphs.
    pub fn all_simple_paths(&self, d: NodeId, p: NodeId) -> Vec<(u64, Vec<NodeId>)> {
        let (Some(&src), Some(&dst)) = (self.index.get(&d), self.index.get(&p)) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut stack = vec![src];
        let mut on_path = vec![false; self.nodes.len()];
        on_path[src] = true;
        self.walk(src, dst, 0, &mut stack, &mut on_path, &mut out);
        out
    }

    fn walk(
        &self,
        u: usize,
        dst: usize,
        delay: u64,
        stack: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<(u64, Vec<NodeId>)>,
    ) {
        if u == dst {
            out.push((delay, stack.iter().map(|&i| self.nodes[i].id).collect()));
            return;
        }
        for &(v, li) in &self.adjacency[u] {
            if on_path[v] {
                continue;
            }
            on_path[v] = true;
            stack.push(v);
            self.walk(v, dst, delay + delay_ns(self.links[li].delay), stack, on_path, out);
            stack.pop();
            on_path[v] = false;
        }
    }
}

/// The fixed 16-router desk-scale tree: one producer (node 0), five edge
/// routers, consumer-to-producer distance of at most seven hops.
pub fn desk16_topology(bandwidth: f64, delay: f64) -> Topology {
    let edges = [9u32, 10, 13, 14, 15];
    let nodes = (0..16u32)
        .map(|i| Node {
            id: NodeId(i),
            role: if i == 0 {
                Role::Producer
            } else if edges.contains(&i) {
                Role::Edge
            } else {
                Role::Intermediate
            },
            cache_capacity: 0,
        })
        .collect();
    let pairs = [
        (0, 1),
        (1, 2),
        (1, 3),
        (2, 4),
        (2, 5),
        (3, 6),
        (4, 7),
        (5, 8),
        (6, 9),
        (6, 10),
        (7, 11),
        (8, 12),
        (11, 13),
        (11, 14),
        (12, 15),
    ];
    let links = pairs.iter().map(|&(a, b)| Link { a: NodeId(a), b: NodeId(b), bandwidth, delay }).collect();
    build_topology(TopologySpec { nodes, links }).expect("desk16 topology is valid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaParams {
    /// Total router count, producers included.
    pub routers: usize,
    /// Number of autonomous systems in the preferential-attachment skeleton.
    pub as_count: usize,
    /// Random chords added inside each AS on top of its spanning tree.
    pub intra_chords: usize,
    pub producers: usize,
    pub edge_routers: usize,
    pub bandwidth: f64,
    pub delay: f64,
}

impl BaParams {
    /// Defaults scaled from the router count: about `sqrt(n)` systems,
    /// one producer per 14 routers and two edge routers per seven.
    pub fn for_routers(routers: usize) -> Self {
        let as_count = (libm::round(libm::sqrt(routers as f64)) as usize).max(2);
        BaParams {
            routers,
            as_count,
            intra_chords: 1,
            producers: (routers / 14).max(1),
            edge_routers: (routers * 2 / 7).max(1),
            bandwidth: 20e6,
            delay: 0.005,
        }
    }
}

/// Preferential-attachment graph on `n` vertices: a triangle (or single
/// link for `n == 2`) seeds the process, then each new vertex links to
/// `m = 2` distinct existing vertices chosen proportionally to degree.
pub fn ba_skeleton<R: Rng>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    const M: usize = 2;
    let mut edges = Vec::new();
    // One entry per edge endpoint, so a uniform pick is degree-proportional.
    let mut endpoints: Vec<usize> = Vec::new();
    let seed = (M + 1).min(n);
    for a in 0..seed {
        for b in a + 1..seed {
            edges.push((a, b));
            endpoints.extend([a, b]);
        }
    }
    for v in seed..n {
        let mut targets = BTreeSet::new();
        while targets.len() < M.min(v) {
            targets.insert(endpoints[rng.random_range(0..endpoints.len())]);
        }
        for t in targets {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    edges
}

/// Two-level random topology: a preferential-attachment skeleton of
/// autonomous systems, random spanning trees plus chords inside each system.
pub fn generate_ba_topology(params: &BaParams, seed: u64) -> Result<Topology, TopologyError> {
    if params.as_count < 2 {
        return Err(TopologyError::InvalidParam("need at least two autonomous systems"));
    }
    if params.routers < params.as_count {
        return Err(TopologyError::InvalidParam("fewer routers than autonomous systems"));
    }
    if params.producers == 0 || params.producers + params.edge_routers > params.routers {
        return Err(TopologyError::InvalidParam("role counts do not fit the router count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.routers;
    // Contiguous blocks of near-equal size.
    let members: Vec<Vec<usize>> = (0..params.as_count)
        .map(|a| {
            let lo = a * n / params.as_count;
            let hi = (a + 1) * n / params.as_count;
            (lo..hi).collect()
        })
        .collect();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let add = |pairs: &mut BTreeSet<(usize, usize)>, a: usize, b: usize| pairs.insert((a.min(b), a.max(b)));
    for group in &members {
        let mut order = group.clone();
        order.shuffle(&mut rng);
        for j in 1..order.len() {
            let parent = order[rng.random_range(0..j)];
            add(&mut pairs, order[j], parent);
        }
        let mut added = 0;
        let mut attempts = 0;
        while added < params.intra_chords && group.len() >= 3 && attempts < 64 {
            attempts += 1;
            let a = group[rng.random_range(0..group.len())];
            let b = group[rng.random_range(0..group.len())];
            if a != b && add(&mut pairs, a, b) {
                added += 1;
            }
        }
    }
    for (x, y) in ba_skeleton(params.as_count, &mut rng) {
        let a = members[x][rng.random_range(0..members[x].len())];
        let b = members[y][rng.random_range(0..members[y].len())];
        add(&mut pairs, a, b);
    }

    let mut degree = vec![0usize; n];
    for &(a, b) in &pairs {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut rng);
    let producers: BTreeSet<usize> = all[..params.producers].iter().copied().collect();
    let mut rest: Vec<usize> = (0..n).filter(|i| !producers.contains(i)).collect();
    rest.sort_by_key(|&i| (degree[i], i));
    let edges: BTreeSet<usize> = rest[..params.edge_routers].iter().copied().collect();

    let nodes = (0..n)
        .map(|i| Node {
            id: NodeId(i as u32),
            role: if producers.contains(&i) {
                Role::Producer
            } else if edges.contains(&i) {
                Role::Edge
            } else {
                Role::Intermediate
            },
            cache_capacity: 0,
        })
        .collect();
    let links = pairs
        .into_iter()
        .map(|(a, b)| Link {
            a: NodeId(a as u32),
            b: NodeId(b as u32),
            bandwidth: params.bandwidth,
            delay: params.delay,
        })
        .collect();
    build_topology(TopologySpec { nodes, links })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u32, role: Role) -> Node {
        Node { id: NodeId(id), role, cache_capacity: 1_000 }
    }

    fn link(a: u32, b: u32, delay: f64) -> Link {
        Link { a: NodeId(a), b: NodeId(b), bandwidth: 20e6, delay }
    }

    #[test]
    fn minimal_graph_has_one_two_hop_path() {
        let t = build_topology(TopologySpec {
            nodes: vec![node(0, Role::Edge), node(1, Role::Producer)],
            links: vec![link(0, 1, 0.001)],
        })
        .unwrap();
        let paths = t.forwarding_paths().unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].len(), 2);
        assert_eq!(paths[0].edge(), NodeId(0));
        assert_eq!(paths[0].producer(), NodeId(1));
    }

    #[test]
    fn build_errors() {
        let dup = TopologySpec { nodes: vec![node(0, Role::Edge), node(0, Role::Producer)], links: vec![] };
        assert_eq!(build_topology(dup), Err(TopologyError::DuplicateNode(NodeId(0))));

        let disconnected = TopologySpec {
            nodes: vec![node(0, Role::Edge), node(1, Role::Intermediate), node(2, Role::Producer)],
            links: vec![link(0, 1, 0.001)],
        };
        assert_eq!(build_topology(disconnected), Err(TopologyError::DisconnectedGraph));

        let no_producer = TopologySpec {
            nodes: vec![node(0, Role::Edge), node(1, Role::Intermediate)],
            links: vec![link(0, 1, 0.001)],
        };
        assert_eq!(build_topology(no_producer), Err(TopologyError::MissingProducer));

        let self_loop = TopologySpec {
            nodes: vec![node(0, Role::Edge), node(1, Role::Producer)],
            links: vec![link(0, 1, 0.001), link(1, 1, 0.001)],
        };
        assert!(matches!(build_topology(self_loop), Err(TopologyError::InvalidLink(..))));
    }

    #[test]
    fn desk16_shape() {
        let t = desk16_topology(20e6, 0.005);
        assert_eq!(t.nodes().len(), 16);
        assert_eq!(t.producers(), vec![NodeId(0)]);
        let paths = t.forwarding_paths().unwrap();
        let longest = paths.iter().map(Path::len).max().unwrap();
        // The consumer access link adds one hop to the router path.
        assert_eq!(longest, 7);
        assert!(paths.iter().all(|p| p.len() >= 5));
    }

    #[test]
    fn line_path() {
        let t = build_topology(TopologySpec {
            nodes: vec![node(0, Role::Edge), node(1, Role::Intermediate), node(2, Role::Producer)],
            links: vec![link(0, 1, 0.001), link(1, 2, 0.001)],
        })
        .unwrap();
        let p = t.shortest_delay_path(NodeId(0), NodeId(2)).unwrap();
        assert_eq!(p.nodes(), &[NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(p.len(), 3);
        assert!((p.delay() - 0.002).abs() < 1e-12);
    }

    fn diamond(d1: f64, d2: f64) -> Topology {
        // 0 -> {1 or 2} -> 3, with route delays d1 via 1 and d2 via 2.
        build_topology(TopologySpec {
            nodes: vec![
                node(0, Role::Edge),
                node(1, Role::Intermediate),
                node(2, Role::Intermediate),
                node(3, Role::Producer),
            ],
            links: vec![link(0, 2, d2 / 2.0), link(2, 3, d2 / 2.0), link(0, 1, d1 / 2.0), link(1, 3, d1 / 2.0)],
        })
        .unwrap()
    }

    #[test]
    fn strict_minimum_wins() {
        let p = diamond(0.003, 0.002).shortest_delay_path(NodeId(0), NodeId(3)).unwrap();
        assert_eq!(p.nodes(), &[NodeId(0), NodeId(2), NodeId(3)]);
    }

    #[test]
    fn equal_delay_breaks_ties_lexicographically() {
        let t = diamond(0.002, 0.002);
        let mut routes = t.all_simple_paths(NodeId(0), NodeId(3));
        routes.sort();
        // Both routes cost 2 ms; the oracle picks the smaller id sequence.
        assert_eq!(routes[0].0, routes[1].0);
        let p = t.shortest_delay_path(NodeId(0), NodeId(3)).unwrap();
        assert_eq!(p.nodes(), routes[0].1.as_slice());
        assert_eq!(p.nodes(), &[NodeId(0), NodeId(1), NodeId(3)]);
    }

    #[test]
    fn role_checks() {
        let t = diamond(0.002, 0.003);
        assert_eq!(t.shortest_delay_path(NodeId(1), NodeId(3)), Err(TopologyError::WrongRole(NodeId(1))));
        assert_eq!(t.shortest_delay_path(NodeId(0), NodeId(2)), Err(TopologyError::WrongRole(NodeId(2))));
    }

    #[test]
    fn ba_42_routers() {
        let t = generate_ba_topology(&BaParams::for_routers(42), 7).unwrap();
        assert_eq!(t.nodes().len(), 42);
        assert_eq!(t.producers().len(), 3);
        assert_eq!(t.edges().len(), 12);
        assert!(t.forwarding_paths().is_ok());
    }

    #[test]
    fn ba_is_deterministic() {
        let p = BaParams::for_routers(30);
        assert_eq!(generate_ba_topology(&p, 3).unwrap(), generate_ba_topology(&p, 3).unwrap());
        assert_ne!(generate_ba_topology(&p, 3).unwrap().links(), generate_ba_topology(&p, 4).unwrap().links());
    }

    #[test]
    fn ba_rejects_single_as() {
        let mut p = BaParams::for_routers(10);
        p.as_count = 1;
        assert!(matches!(generate_ba_topology(&p, 1), Err(TopologyError::InvalidParam(_))));
    }

    #[test]
    fn ba_connected_across_seeds() {
        for seed in 0..50 {
            for n in [4usize, 9, 16, 42] {
                let mut p = BaParams::for_routers(n);
                p.edge_routers = p.edge_routers.min(n - p.producers);
                generate_ba_topology(&p, seed).expect("connected");
            }
        }
    }

    #[test]
    fn ba_skeleton_is_heavy_tailed() {
        for seed in 0..20 {
            for n in [20usize, 40, 80] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut deg = vec![0usize; n];
                for (a, b) in ba_skeleton(n, &mut rng) {
                    deg[a] += 1;
                    deg[b] += 1;
                }
                let max = *deg.iter().max().unwrap();
                deg.sort_unstable();
                let median = deg[n / 2];
                assert!(max >= 2 * median, "seed {seed} n {n}: max {max} median {median}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn shortest_path_beats_every_alternative(
            seed in 0u64..10_000,
            n in 3usize..=8,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Random connected graph: spanning tree plus extra links, integer-ms delays.
            let mut links = Vec::new();
            let mut pairs = BTreeSet::new();
            for v in 1..n {
                let u = rng.random_range(0..v);
                pairs.insert((u, v));
            }
            for _ in 0..n {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
            for (a, b) in pairs {
                let ms = rng.random_range(1..4) as f64;
                links.push(link(a as u32, b as u32, ms * 1e-3));
            }
            let mut nodes: Vec<Node> = (0..n as u32).map(|i| node(i, Role::Intermediate)).collect();
            nodes[0].role = Role::Edge;
            nodes[n - 1].role = Role::Producer;
            let t = build_topology(TopologySpec { nodes, links }).unwrap();
            let p = t.shortest_delay_path(NodeId(0), NodeId(n as u32 - 1)).unwrap();
            let mut routes = t.all_simple_paths(NodeId(0), NodeId(n as u32 - 1));
            routes.sort();
            proptest::prop_assert_eq!(p.delay_ns, routes[0].0);
            proptest::prop_assert_eq!(p.nodes(), routes[0].1.as_slice());
            let unique: BTreeSet<_> = p.nodes().iter().collect();
            proptest::prop_assert_eq!(unique.len(), p.len());
        }
    }
}
