//! Per-session quality metrics and store sizing.

use alloc::vec::Vec;

use crate::catalog::{Catalog, ConsumerId};
use crate::sim::SessionTrace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionQoE {
    pub session_id: u32,
    pub consumer: ConsumerId,
    /// Mean bitrate over requested segments, bits/second.
    pub avg_bitrate: f64,
    pub switch_count: u32,
    pub down_switches: u32,
    /// Stalled time over active time (media played plus stalls).
    pub rebuffer_pct: f64,
}

/// Bitrate ranks requested in order, including a request cut off by the end of the run.
fn requested_ranks(trace: &SessionTrace) -> Vec<usize> {
    let mut ranks: Vec<usize> = trace.records.iter().map(|r| r.rank.index()).collect();
    if let Some(a) = trace.aborted {
        ranks.push(a.rank.index());
    }
    ranks
}

/// Quality summary of one session. Sessions that issued no request report
/// zero for every metric.
pub fn session_qoe(trace: &SessionTrace, catalog: &Catalog) -> SessionQoE {
    let ranks = requested_ranks(trace);
    let ladder = catalog.ladder();
    let avg_bitrate =
        if ranks.is_empty() { 0.0 } else { ranks.iter().map(|&r| ladder[r]).sum::<f64>() / ranks.len() as f64 };
    let (switch_count, down_switches) = switches(&ranks);
    let stall = trace.rebuffer_time();
    let active = trace.played + stall;
    let rebuffer_pct = if active > 0.0 { stall / active } else { 0.0 };
    SessionQoE {
        session_id: trace.session.id,
        consumer: trace.session.consumer,
        avg_bitrate,
        switch_count,
        down_switches,
        rebuffer_pct,
    }
}

/// (all switches, downward switches) in a rank sequence.
pub fn switches(ranks: &[usize]) -> (u32, u32) {
    ranks.windows(2).fold((0, 0), |(all, down), w| (all + u32::from(w[0] != w[1]), down + u32::from(w[1] < w[0])))
}

/// Per-router store size: the corpus split evenly over `n_routers`, scaled by `omega`.
pub fn store_size_from_omega(total_bytes: u64, n_routers: usize, omega: f64) -> u64 {
    assert!(n_routers >= 1, "at least one router");
    libm::floor(total_bytes as f64 / n_routers as f64 * omega) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{BitrateRank, Session};
    use crate::sim::{AbortRecord, SegmentRecord};
    use crate::topology::NodeId;
    use alloc::vec;

    fn trace(ranks: &[u8], stall: f64) -> SessionTrace {
        let records = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| SegmentRecord {
                time: i as f64,
                requested_at: i as f64,
                segment: i as u32 + 1,
                rank: BitrateRank::new(r),
                hit_hop: 1,
                delay: 0.5,
                stall: 0.0,
                buffer_after: 4.0,
            })
            .collect();
        SessionTrace {
            session: Session { id: 3, consumer: ConsumerId(1), start: 0.0, file: 1 },
            edge: NodeId(1),
            path_len: 2,
            records,
            rebuffer_intervals: if stall > 0.0 { vec![(10.0, 10.0 + stall)] } else { vec![] },
            completed: true,
            aborted: None,
            played: ranks.len() as f64 * 4.0,
        }
    }

    fn catalog() -> Catalog {
        Catalog::new(1, 30, vec![1e6, 2.5e6, 5e6, 8e6], 4.0).unwrap()
    }

    #[test]
    fn average_and_switches() {
        let q = session_qoe(&trace(&[1, 2, 2, 3], 0.0), &catalog());
        assert!((q.avg_bitrate - 2.75e6).abs() < 1e-6);
        assert_eq!(q.switch_count, 2);
        assert_eq!(q.down_switches, 0);
        assert_eq!(q.session_id, 3);
    }

    #[test]
    fn constant_session_has_no_switches() {
        let q = session_qoe(&trace(&[2; 6], 0.0), &catalog());
        assert_eq!(q.switch_count, 0);
        // Written to CSV, so no "-0".
        assert!(q.rebuffer_pct == 0.0 && q.rebuffer_pct.is_sign_positive());
    }

    #[test]
    fn rebuffer_share_of_active_time() {
        let mut t = trace(&[1; 28], 6.0);
        t.played = 114.0;
        let q = session_qoe(&t, &catalog());
        assert!((q.rebuffer_pct - 0.05).abs() < 1e-12);
    }

    #[test]
    fn aborted_request_counts_as_requested() {
        let mut t = trace(&[3, 3], 0.0);
        t.aborted = Some(AbortRecord { time: 9.0, segment: 3, rank: BitrateRank::new(2) });
        let q = session_qoe(&t, &catalog());
        assert_eq!(q.switch_count, 1);
        assert_eq!(q.down_switches, 1);
    }

    #[test]
    fn omega_sizing() {
        assert_eq!(store_size_from_omega(1_000_000_000, 16, 0.2), 12_500_000);
        assert_eq!(store_size_from_omega(1234, 1, 1.0), 1234);
        assert_eq!(store_size_from_omega(1234, 5, 0.0), 0);
    }

    proptest::proptest! {
        #[test]
        fn metrics_in_range(ranks in proptest::collection::vec(1u8..=4, 1..40), stall in 0.0f64..100.0) {
            let q = session_qoe(&trace(&ranks, stall), &catalog());
            proptest::prop_assert!(q.avg_bitrate >= 1e6 && q.avg_bitrate <= 8e6);
            proptest::prop_assert!((0.0..=1.0).contains(&q.rebuffer_pct));
            proptest::prop_assert!(q.down_switches <= q.switch_count);
        }
    }
}
