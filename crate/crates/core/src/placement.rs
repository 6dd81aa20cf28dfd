use alloc::collections::{BTreeMap, BTreeSet};

use crate::catalog::{Catalog, SegmentId};
use crate::topology::{NodeId, Topology};

/// Segments held by each router store. Producers are implicit: they always
/// serve their own files and never appear here.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Placement {
    stores: BTreeMap<NodeId, BTreeSet<SegmentId>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CapacityViolation {
    pub node: NodeId,
    pub used: u64,
    pub capacity: u64,
}

impl Placement {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the segment was already placed there.
    pub fn insert(&mut self, node: NodeId, segment: SegmentId) -> bool {
        self.stores.entry(node).or_default().insert(segment)
    }

    pub fn remove(&mut self, node: NodeId, segment: SegmentId) -> bool {
        let Some(set) = self.stores.get_mut(&node) else {
            return false;
        };
        let removed = set.remove(&segment);
        if set.is_empty() {
            self.stores.remove(&node);
        }
        removed
    }

    pub fn contains(&self, node: NodeId, segment: SegmentId) -> bool {
        self.stores.get(&node).is_some_and(|s| s.contains(&segment))
    }

    pub fn at(&self, node: NodeId) -> impl Iterator<Item = SegmentId> + '_ {
        self.stores.get(&node).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.stores.keys().copied()
    }

    /// All (router, segment) pairs ordered by router then segment.
    pub fn entries(&self) -> impl Iterator<Item = (NodeId, SegmentId)> + '_ {
        self.stores.iter().flat_map(|(&n, s)| s.iter().map(move |&seg| (n, seg)))
    }

    pub fn len(&self) -> usize {
        self.stores.values().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.stores.is_empty()
    }

    pub fn bytes_at(&self, node: NodeId, catalog: &Catalog) -> u64 {
        self.at(node).map(|s| catalog.segment_size(s.rank)).sum()
    }

    /// Routers whose placed bytes exceed their store size.
    pub fn capacity_violations(&self, topology: &Topology, catalog: &Catalog) -> alloc::vec::Vec<CapacityViolation> {
        self.nodes()
            .filter_map(|node| {
                let used = self.bytes_at(node, catalog);
                let capacity = topology.capacity(node);
                (used > capacity).then_some(CapacityViolation { node, used, capacity })
            })
            .collect()
    }
}

impl FromIterator<(NodeId, SegmentId)> for Placement {
    fn from_iter<T: IntoIterator<Item = (NodeId, SegmentId)>>(iter: T) -> Self {
        let mut p = Placement::new();
        for (n, s) in iter {
            p.insert(n, s);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::BitrateRank;
    use crate::topology::{build_topology, Link, Node, Role, TopologySpec};
    use alloc::vec;

    #[test]
    fn capacity_report() {
        let topo = build_topology(TopologySpec {
            nodes: vec![
                Node { id: NodeId(0), role: Role::Producer, cache_capacity: 0 },
                Node { id: NodeId(1), role: Role::Edge, cache_capacity: 600_000 },
            ],
            links: vec![Link { a: NodeId(0), b: NodeId(1), bandwidth: 1e6, delay: 0.0 }],
        })
        .unwrap();
        let cat = Catalog::new(2, 1, vec![1e6, 2.5e6], 4.0).unwrap();
        let mut p = Placement::new();
        p.insert(NodeId(1), SegmentId::new(1, 1, BitrateRank::BASE));
        assert!(p.capacity_violations(&topo, &cat).is_empty());
        p.insert(NodeId(1), SegmentId::new(2, 1, BitrateRank::BASE));
        assert_eq!(
            p.capacity_violations(&topo, &cat),
            vec![CapacityViolation { node: NodeId(1), used: 1_000_000, capacity: 600_000 }]
        );
        assert!(p.remove(NodeId(1), SegmentId::new(2, 1, BitrateRank::BASE)));
        assert_eq!(p.len(), 1);
    }
}
