//! Ripple bitrate extraction and the bitrate-aware cache-hit reward.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::catalog::{BitrateRank, Catalog};
use crate::sim::stats::StatsLedger;
use crate::topology::NodeId;

/// Delay means built from fewer samples than this are treated as absent.
pub const MIN_DELAY_SAMPLES: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RewardError {
    #[error("no delay statistics at edge {edge} hop {hop}")]
    MissingStats { edge: NodeId, hop: usize },
}

/// Weight of the next-higher rung: `1 / (eta + rank)`.
pub fn beta(rank: BitrateRank, eta: f64) -> f64 {
    1.0 / (eta + rank.get() as f64)
}

/// Reward of a hit on `b` where `rb` is the highest sustainable rank
/// (`None` when even the base rank misses the deadline). `mu` is indexed by
/// rank index.
pub fn gamma(rb: Option<BitrateRank>, b: BitrateRank, mu: &[f64], eta: f64) -> f64 {
    let Some(rb) = rb else {
        return mu[0];
    };
    if b == rb {
        mu[b.index()]
    } else if b < rb {
        let up = b.index() + 1;
        if up >= mu.len() {
            return mu[b.index()];
        }
        let w = beta(b, eta);
        mu[up] * w + mu[b.index()] * (1.0 - w)
    } else {
        mu[rb.index()]
    }
}

/// Highest rank whose mean delay meets `deadline`; `None` when no observed
/// rank does. `means[r]` is the mean delay of rank index `r`, if known.
pub fn ripple_bitrate_from_means(means: &[Option<f64>], deadline: f64) -> Option<BitrateRank> {
    means
        .iter()
        .enumerate()
        .rev()
        .find(|(_, m)| m.is_some_and(|d| d <= deadline))
        .map(|(i, _)| BitrateRank::from_index(i))
}

fn usable_mean(stats: &StatsLedger, edge: NodeId, hop: usize, rank: BitrateRank, min_samples: u64) -> Option<f64> {
    stats.delay(edge, hop, rank).filter(|m| m.count() >= min_samples).and_then(|m| m.mean())
}

/// Ripple bitrate at `hop` of the path starting at `edge`.
pub fn ripple_bitrate(
    stats: &StatsLedger,
    catalog: &Catalog,
    edge: NodeId,
    hop: usize,
    deadline: f64,
    min_samples: u64,
) -> Result<Option<BitrateRank>, RewardError> {
    let means: Vec<Option<f64>> = catalog.ranks().map(|r| usable_mean(stats, edge, hop, r, min_samples)).collect();
    if means.iter().all(Option::is_none) {
        return Err(RewardError::MissingStats { edge, hop });
    }
    Ok(ripple_bitrate_from_means(&means, deadline))
}

/// Ripple bitrates for every hop of every path, keyed by (edge, path length).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RippleBitrateTable {
    entries: BTreeMap<(NodeId, usize), Option<BitrateRank>>,
}

impl RippleBitrateTable {
    /// Builds the table for hops `1..=len` behind each `(edge, len)` path.
    ///
    /// A (hop, rank) cell without enough samples borrows the mean of the
    /// nearest observed hop further upstream, else the nearest observed
    /// downstream hop, scaled by `hop / observed_hop` since delay builds up
    /// per hop. With producer-only statistics closer hops thus get higher
    /// ripple bitrates than the producer.
    pub fn build(
        stats: &StatsLedger,
        catalog: &Catalog,
        paths: impl IntoIterator<Item = (NodeId, usize)>,
        deadline: f64,
        min_samples: u64,
    ) -> Self {
        let mut entries = BTreeMap::new();
        for (edge, len) in paths {
            for hop in 1..=len {
                let means: Vec<Option<f64>> = catalog
                    .ranks()
                    .map(|r| {
                        let at =
                            |h: usize| usable_mean(stats, edge, h, r, min_samples).map(|d| d * hop as f64 / h as f64);
                        (hop..=len).find_map(at).or_else(|| (1..hop).rev().find_map(at))
                    })
                    .collect();
                // Nothing observed at all: assume every rank meets the deadline.
                let rb = if means.iter().all(Option::is_none) {
                    Some(catalog.top_rank())
                } else {
                    ripple_bitrate_from_means(&means, deadline)
                };
                entries.insert((edge, hop), rb);
            }
        }
        RippleBitrateTable { entries }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ((NodeId, usize), Option<BitrateRank>)>) -> Self {
        RippleBitrateTable { entries: entries.into_iter().collect() }
    }

    pub fn get(&self, edge: NodeId, hop: usize) -> Option<BitrateRank> {
        self.entries.get(&(edge, hop)).copied().flatten()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((NodeId, usize), Option<BitrateRank>)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const MU: [f64; 4] = [1.0, 2.5, 5.0, 8.0];

    fn r(n: u8) -> BitrateRank {
        BitrateRank::new(n)
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta(r(1), 1.0), 0.5);
        assert_eq!(beta(r(1), 0.0), 1.0);
        assert_eq!(beta(r(4), 1.0), 0.2);
    }

    #[test]
    fn gamma_cases() {
        assert_eq!(gamma(Some(r(2)), r(2), &MU, 1.0), 2.5);
        assert!((gamma(Some(r(3)), r(1), &MU, 1.0) - 1.75).abs() < 1e-12);
        assert_eq!(gamma(Some(r(1)), r(3), &MU, 1.0), 1.0);
        assert_eq!(gamma(None, r(3), &MU, 1.0), 1.0);
    }

    #[test]
    fn single_rung_ladder() {
        assert_eq!(gamma(Some(r(1)), r(1), &[1.0], 0.0), 1.0);
    }

    #[test]
    fn rb_from_delay_columns() {
        // Rows B1, B2, B3; columns are hop distances.
        let cols = [[0.5, 1.0, 3.0], [1.0, 3.5, 6.5], [2.0, 6.5, 10.5], [3.0, 11.0, 16.5]];
        let want = [Some(r(3)), Some(r(2)), Some(r(1)), Some(r(1))];
        for (c, w) in cols.iter().zip(want) {
            let means: Vec<Option<f64>> = c.iter().map(|&d| Some(d)).collect();
            assert_eq!(ripple_bitrate_from_means(&means, 4.0), w);
        }
        assert_eq!(ripple_bitrate_from_means(&[Some(5.0), Some(9.0)], 4.0), None);
    }

    fn catalog3() -> Catalog {
        Catalog::new(1, 1, vec![1e6, 2.5e6, 5e6], 4.0).unwrap()
    }

    #[test]
    fn ripple_bitrate_needs_samples() {
        let c = catalog3();
        let mut s = StatsLedger::new();
        let e = NodeId(1);
        assert_eq!(ripple_bitrate(&s, &c, e, 2, 4.0, 3), Err(RewardError::MissingStats { edge: e, hop: 2 }));
        for (rank, d) in [(1, 1.0), (2, 3.5), (3, 6.5)] {
            for _ in 0..3 {
                s.record_delivery(e, 2, r(rank), d);
            }
        }
        assert_eq!(ripple_bitrate(&s, &c, e, 2, 4.0, 3), Ok(Some(r(2))));
        // Extra samples at the same means do not move the result.
        s.record_delivery(e, 2, r(3), 6.5);
        s.record_delivery(e, 2, r(2), 3.5);
        assert_eq!(ripple_bitrate(&s, &c, e, 2, 4.0, 3), Ok(Some(r(2))));
    }

    #[test]
    fn table_fills_from_nearest_observed_hop() {
        let c = catalog3();
        let mut s = StatsLedger::new();
        let e = NodeId(1);
        for (rank, d) in [(1, 2.0), (2, 5.0), (3, 9.0)] {
            for _ in 0..3 {
                s.record_delivery(e, 3, r(rank), d);
            }
        }
        for _ in 0..3 {
            s.record_delivery(e, 1, r(3), 1.0);
        }
        let t = RippleBitrateTable::build(&s, &c, [(e, 3)], 4.0, 3);
        assert_eq!(t.get(e, 3), Some(r(1)));
        // Hop 2 scales hop 3 by 2/3: 1.33, 3.33, 6.0.
        assert_eq!(t.get(e, 2), Some(r(2)));
        assert_eq!(t.get(e, 1), Some(r(3)));
    }

    proptest::proptest! {
        #[test]
        fn gamma_bounds(rb in proptest::option::of(1u8..=4), b in 1u8..=4, eta in 0.0f64..50.0) {
            let g = gamma(rb.map(r), r(b), &MU, eta);
            proptest::prop_assert!((1.0..=8.0).contains(&g));
            if rb == Some(b) {
                proptest::prop_assert_eq!(g, MU[b as usize - 1]);
            }
            if let Some(rb) = rb {
                if b < rb {
                    proptest::prop_assert!(g > MU[b as usize - 1] && g < MU[b as usize]);
                }
                if b > rb {
                    proptest::prop_assert_eq!(g, MU[rb as usize - 1]);
                }
            }
        }

        #[test]
        fn gamma_tends_to_mu_for_large_eta(b in 1u8..=3) {
            let g = gamma(Some(r(4)), r(b), &MU, 1e12);
            proptest::prop_assert!((g - MU[b as usize - 1]).abs() < 1e-9);
        }
    }
}
