//! Exact solver against brute-force enumeration on tiny instances.

use std::collections::BTreeMap;

use proptest::prelude::*;
use ripplecache_core::catalog::{BitrateRank, SegmentId};
use ripplecache_core::classic::{solve_exact, BipInstance, BipPath, DEFAULT_BUDGET};
use ripplecache_core::placement::Placement;
use ripplecache_core::topology::NodeId;

/// Two ranks sized 2 and 5 units (ratio 2.5), reward weight 1.
const SIZES: [u64; 2] = [2, 5];

/// Reward by (ripple rank, requested rank) with ratios [1, 2.5] and weight 1:
/// none -> 1; rb=1 -> 1 for both; rb=2 -> 1.75 for rank 1 and 2.5 for rank 2.
fn reward(rb: Option<u8>, b: u8) -> f64 {
    match (rb, b) {
        (None, _) | (Some(1), _) => 1.0,
        (Some(2), 1) => 1.75,
        (Some(2), 2) => 2.5,
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone)]
struct Tiny {
    paths: Vec<Vec<u32>>,
    rb: Vec<Vec<Option<u8>>>,
    theta: Vec<BTreeMap<SegmentId, u64>>,
    capacity: BTreeMap<u32, u64>,
}

fn tiny() -> impl Strategy<Value = Tiny> {
    (1usize..=3, 1u32..=2, 1u32..=2)
        .prop_flat_map(|(routers, files, segs)| (Just(routers), Just(files), Just(segs), 1..=routers.min(2)))
        .prop_flat_map(|(routers, files, segs, npaths)| {
            // Path i starts at edge router i + 1, then 0..=2 other routers, then producer 0.
            let path = |edge: u32| {
                let others: Vec<u32> = (1..=routers as u32).filter(|&r| r != edge).collect();
                (Just(others).prop_shuffle(), 0usize..=2).prop_map(move |(mut o, extra)| {
                    o.truncate(extra);
                    let mut p = vec![edge];
                    p.extend(o);
                    p.push(0);
                    p
                })
            };
            let paths: Vec<_> = (1..=npaths as u32).map(path).collect();
            let n_seg = (files * segs * 2) as usize;
            (
                paths,
                proptest::collection::vec(
                    proptest::collection::vec(prop_oneof![Just(None), Just(Some(1u8)), Just(Some(2u8))], 4),
                    npaths,
                ),
                proptest::collection::vec(proptest::collection::vec(0u64..5, n_seg), npaths),
                proptest::collection::vec(0u64..=10, routers),
            )
                .prop_map(move |(paths, rb, counts, caps)| {
                    let all: Vec<SegmentId> = (1..=files)
                        .flat_map(|f| {
                            (1..=segs)
                                .flat_map(move |k| (1..=2).map(move |b| SegmentId::new(f, k, BitrateRank::new(b))))
                        })
                        .collect();
                    let theta = counts
                        .iter()
                        .map(|c| all.iter().zip(c).filter(|(_, &n)| n > 0).map(|(&s, &n)| (s, n)).collect())
                        .collect();
                    let rb = rb.into_iter().zip(&paths).map(|(r, p)| r[..p.len()].to_vec()).collect();
                    let capacity = caps.iter().enumerate().map(|(i, &c)| (i as u32 + 1, c)).collect();
                    Tiny { paths, rb, theta, capacity }
                })
        })
}

fn first_hop(t: &Tiny, x: &BTreeMap<u32, Vec<SegmentId>>, p: usize, s: SegmentId) -> usize {
    let path = &t.paths[p];
    for (i, r) in path[..path.len() - 1].iter().enumerate() {
        if x.get(r).is_some_and(|v| v.contains(&s)) {
            return i + 1;
        }
    }
    path.len()
}

fn oracle_value(t: &Tiny, x: &BTreeMap<u32, Vec<SegmentId>>) -> Option<f64> {
    for (r, segs) in x {
        let used: u64 = segs.iter().map(|s| SIZES[s.rank.index()]).sum();
        if used > t.capacity[r] {
            return None;
        }
    }
    for (p, theta) in t.theta.iter().enumerate() {
        let l = t.paths[p].len();
        for b in 1..=2u8 {
            let mut ranked: Vec<(SegmentId, u64)> =
                theta.iter().filter(|(s, _)| s.rank.get() == b).map(|(&s, &n)| (s, n)).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.file.cmp(&b.0.file)).then(a.0.segment.cmp(&b.0.segment)));
            for w in ranked.windows(2) {
                let hm = first_hop(t, x, p, w[0].0);
                let hl = first_hop(t, x, p, w[1].0);
                if hm < l && hl < hm {
                    return None;
                }
            }
        }
    }
    let mut v = 0.0;
    for (p, theta) in t.theta.iter().enumerate() {
        for (&s, &n) in theta {
            let h = first_hop(t, x, p, s);
            v += reward(t.rb[p][h - 1], s.rank.get()) * n as f64;
        }
    }
    Some(v)
}

/// Subsets of `items` whose sizes fit `cap`.
fn fitting_subsets(items: &[SegmentId], cap: u64) -> Vec<Vec<SegmentId>> {
    let mut out = vec![Vec::new()];
    for &s in items {
        let size = SIZES[s.rank.index()];
        let more: Vec<Vec<SegmentId>> = out
            .iter()
            .filter(|v: &&Vec<SegmentId>| v.iter().map(|x| SIZES[x.rank.index()]).sum::<u64>() + size <= cap)
            .map(|v| {
                let mut v = v.clone();
                v.push(s);
                v
            })
            .collect();
        out.extend(more);
    }
    out
}

/// Best objective over every placement. Segments nobody behind a router
/// requests cannot raise the objective, so each router only ranges over
/// subsets of the segments requested on paths through it.
fn brute_force(t: &Tiny) -> f64 {
    let routers: Vec<u32> = t.capacity.keys().copied().collect();
    let options: Vec<Vec<Vec<SegmentId>>> = routers
        .iter()
        .map(|r| {
            let mut useful: Vec<SegmentId> = t
                .paths
                .iter()
                .zip(&t.theta)
                .filter(|(p, _)| p[..p.len() - 1].contains(r))
                .flat_map(|(_, th)| th.keys().copied())
                .collect();
            useful.sort();
            useful.dedup();
            fitting_subsets(&useful, t.capacity[r])
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; routers.len()];
    loop {
        let x: BTreeMap<u32, Vec<SegmentId>> =
            routers.iter().zip(&idx).enumerate().map(|(j, (&r, &i))| (r, options[j][i].clone())).collect();
        if let Some(v) = oracle_value(t, &x) {
            best = best.max(v);
        }
        let mut d = 0;
        loop {
            if d == idx.len() {
                return best;
            }
            idx[d] += 1;
            if idx[d] < options[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn instance(t: &Tiny) -> BipInstance {
    let paths = t.paths.iter().map(|p| BipPath { nodes: p.iter().map(|&n| NodeId(n)).collect() }).collect();
    let gamma =
        t.rb.iter().map(|hops| hops.iter().map(|&rb| (1..=2).map(|b| reward(rb, b)).collect()).collect()).collect();
    let capacity = t.capacity.iter().map(|(&r, &c)| (NodeId(r), c)).collect();
    BipInstance::new(paths, t.theta.clone(), gamma, capacity, SIZES.to_vec()).unwrap()
}

fn to_map(p: &Placement) -> BTreeMap<u32, Vec<SegmentId>> {
    let mut m: BTreeMap<u32, Vec<SegmentId>> = BTreeMap::new();
    for (n, s) in p.entries() {
        m.entry(n.0).or_default().push(s);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_enumeration(t in tiny()) {
        let inst = instance(&t);
        let sol = solve_exact(&inst, DEFAULT_BUDGET).unwrap();
        prop_assert!(sol.optimal);
        let x = to_map(&sol.placement);
        let own = oracle_value(&t, &x);
        prop_assert_eq!(own, Some(sol.objective), "solver placement judged differently");
        prop_assert_eq!(sol.objective, brute_force(&t));
    }

    #[test]
    fn objective_matches_first_hit_accounting(t in tiny(), picks in proptest::collection::vec(any::<bool>(), 64)) {
        // Arbitrary placements that fit, feasible or not under popularity.
        let inst = instance(&t);
        let mut x = Placement::new();
        let mut bits = picks.into_iter().cycle();
        for (&r, &cap) in &t.capacity {
            let mut used = 0;
            for th in &t.theta {
                for &s in th.keys() {
                    let size = SIZES[s.rank.index()];
                    if bits.next().unwrap() && used + size <= cap && x.insert(NodeId(r), s) {
                        used += size;
                    }
                }
            }
        }
        match (inst.objective_value(&x), oracle_value(&t, &to_map(&x))) {
            (Ok(a), Some(b)) => prop_assert_eq!(a, b),
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "solver {:?} vs oracle {:?}", a, b),
        }
    }
}
