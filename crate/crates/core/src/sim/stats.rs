use alloc::collections::BTreeMap;

use crate::catalog::{BitrateRank, SegmentId};
use crate::topology::NodeId;

/// Incremental arithmetic mean.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningMean {
    count: u64,
    mean: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `None` until the first sample.
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }
}

/// Request counts per edge router and delivery delays per (edge, hop, bitrate).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsLedger {
    theta: BTreeMap<NodeId, BTreeMap<SegmentId, u64>>,
    delays: BTreeMap<(NodeId, usize, BitrateRank), RunningMean>,
}

impl StatsLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_request(&mut self, edge: NodeId, segment: SegmentId) {
        *self.theta.entry(edge).or_default().entry(segment).or_insert(0) += 1;
    }

    /// Adds `count` requests at once.
    pub fn add_requests(&mut self, edge: NodeId, segment: SegmentId, count: u64) {
        if count > 0 {
            *self.theta.entry(edge).or_default().entry(segment).or_insert(0) += count;
        }
    }

    /// `hop` is the 1-based position on the forwarding path that served the segment.
    pub fn record_delivery(&mut self, edge: NodeId, hop: usize, rank: BitrateRank, delay: f64) {
        assert!(hop >= 1, "hops are 1-based");
        self.delays.entry((edge, hop, rank)).or_default().push(delay);
    }

    pub fn theta(&self, edge: NodeId, segment: SegmentId) -> u64 {
        self.theta.get(&edge).and_then(|m| m.get(&segment)).copied().unwrap_or(0)
    }

    /// Requested segments at `edge` with their counts, in `SegmentId` order.
    pub fn requests_at(&self, edge: NodeId) -> impl Iterator<Item = (SegmentId, u64)> + '_ {
        self.theta.get(&edge).into_iter().flat_map(|m| m.iter().map(|(&s, &c)| (s, c)))
    }

    pub fn edges(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.theta.keys().copied()
    }

    pub fn delay(&self, edge: NodeId, hop: usize, rank: BitrateRank) -> Option<RunningMean> {
        self.delays.get(&(edge, hop, rank)).copied()
    }

    pub fn mean_delay(&self, edge: NodeId, hop: usize, rank: BitrateRank) -> Option<f64> {
        self.delay(edge, hop, rank).and_then(|m| m.mean())
    }

    pub fn total_requests(&self) -> u64 {
        self.theta.values().flat_map(|m| m.values()).sum()
    }

    pub fn delay_entries(&self) -> impl Iterator<Item = ((NodeId, usize, BitrateRank), RunningMean)> + '_ {
        self.delays.iter().map(|(&k, &v)| (k, v))
    }
}
