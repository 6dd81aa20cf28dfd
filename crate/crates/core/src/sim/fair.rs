//! Max-min fair rate allocation by progressive filling.

use alloc::vec;
use alloc::vec::Vec;

/// Max-min fair rates for `flows`, each given as the list of link indices
/// it crosses, over links with `capacity` (bits/second).
///
/// Flows crossing no link are unconstrained and get `f64::INFINITY`.
pub fn fair_share_rates<F: AsRef<[usize]>>(flows: &[F], capacity: &[f64]) -> Vec<f64> {
    let mut rate = vec![f64::INFINITY; flows.len()];
    let mut frozen = vec![false; flows.len()];
    let mut remaining = capacity.to_vec();
    let mut users: Vec<usize> = vec![0; capacity.len()];
    for f in flows {
        for &l in f.as_ref() {
            users[l] += 1;
        }
    }
    for (i, f) in flows.iter().enumerate() {
        if f.as_ref().is_empty() {
            frozen[i] = true;
        }
    }
    loop {
        // Tightest link among those still carrying unfrozen flows.
        let mut share = f64::INFINITY;
        for (l, &n) in users.iter().enumerate() {
            if n > 0 {
                share = share.min(remaining[l].max(0.0) / n as f64);
            }
        }
        if !share.is_finite() {
            break;
        }
        // Freeze every flow on a link saturated at this share.
        let tol = share * 1e-12;
        let saturated: Vec<bool> =
            users.iter().enumerate().map(|(l, &n)| n > 0 && remaining[l].max(0.0) / n as f64 <= share + tol).collect();
        for (i, f) in flows.iter().enumerate() {
            if frozen[i] || !f.as_ref().iter().any(|&l| saturated[l]) {
                continue;
            }
            frozen[i] = true;
            rate[i] = share;
            for &l in f.as_ref() {
                remaining[l] -= share;
                users[l] -= 1;
            }
        }
    }
    rate
}
