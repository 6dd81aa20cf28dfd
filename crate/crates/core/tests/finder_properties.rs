//! Heuristic placement on random topologies fed by simulated demand.

use proptest::prelude::*;
use ripplecache_core::catalog::{sample_sessions, Catalog, ConsumerId, Workload};
use ripplecache_core::experiment::sized_topology;
use ripplecache_core::finder::{ripple_violations, run_ripple_finder, FinderError, FinderReport};
use ripplecache_core::sim::{run_simulation, CachePolicy, SimConfig};
use ripplecache_core::topology::{generate_ba_topology, BaParams};

fn run(routers: usize, seed: u64, omega: f64) -> (FinderReport, ripplecache_core::topology::Topology, Catalog) {
    let topo = generate_ba_topology(&BaParams::for_routers(routers), seed).unwrap();
    let catalog = Catalog::new(6, 8, vec![1e6, 2.5e6, 5e6, 8e6], 4.0).unwrap();
    let (topo, _) = sized_topology(&topo, &catalog, omega);
    let consumers: Vec<ConsumerId> = (0..8).map(ConsumerId).collect();
    let wl = Workload { mean_interval: 120.0, horizon: 600.0, alpha: 1.2 };
    let sched = sample_sessions(&catalog, &consumers, &wl, seed);
    let cfg = SimConfig { seed, consumers: 8, ..SimConfig::default() };
    let stats = run_simulation(&topo, &catalog, &CachePolicy::NoCache, &sched, &cfg).unwrap().stats;
    // Termination is guaranteed, so a generous bound must be enough.
    let report = match run_ripple_finder(&topo, &catalog, &stats, 1000) {
        Ok(r) => r,
        Err(FinderError::NonConvergence { .. }) => panic!("no fixpoint after 1000 rounds"),
        Err(e) => panic!("{e}"),
    };
    (report, topo, catalog)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn reaches_fixpoint_with_valid_placement(routers in 5usize..=16, seed in 0u64..1000, omega in 0.05f64..0.6) {
        let (report, topo, catalog) = run(routers, seed, omega);
        prop_assert!(report.converged);
        prop_assert!(report.monotone());
        prop_assert!(report.placement.capacity_violations(&topo, &catalog).is_empty());
        for p in &report.paths {
            prop_assert_eq!(ripple_violations(&p.ccts), 0);
            for (j, cct) in p.ccts.iter().enumerate() {
                // At the fixpoint every router kept its whole nomination.
                let bytes: u64 = cct.iter().map(|e| catalog.segment_size(e.segment.rank)).sum();
                prop_assert!(bytes <= p.volumes.per_hop[j]);
                prop_assert!(p.volumes.per_hop[j] <= topo.capacity(p.nodes[j]));
                prop_assert!(cct.iter().all(|e| report.placement.contains(p.nodes[j], e.segment)));
            }
        }
        // Only routers hold content.
        for n in report.placement.nodes() {
            prop_assert!(topo.routers().contains(&n));
        }
    }
}

#[test]
fn identical_inputs_give_identical_placements() {
    let (a, _, _) = run(12, 7, 0.2);
    let (b, _, _) = run(12, 7, 0.2);
    assert_eq!(a, b);
    assert!(a.placement.len() > 0);
}
