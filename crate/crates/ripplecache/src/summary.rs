//! Per-run rows, per-point means and 95% confidence intervals.

use std::collections::BTreeMap;

use ripplecache_core::metrics::SessionQoE;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Columns of the results file, in order.
pub const RESULT_COLUMNS: [&str; 9] = [
    "profile",
    "policy",
    "omega",
    "alpha",
    "eta",
    "seed",
    "avg_bitrate_mbps",
    "switch_count_mean",
    "rebuffer_pct_mean",
];

/// One (point, policy, seed) run: session means.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRow {
    pub profile: String,
    pub policy: String,
    pub omega: f64,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub avg_bitrate_mbps: f64,
    pub switch_count_mean: f64,
    pub rebuffer_pct_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionRow {
    pub profile: String,
    pub policy: String,
    pub omega: f64,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub session_id: u32,
    pub consumer: u32,
    pub avg_bitrate_mbps: f64,
    pub switch_count: u32,
    pub down_switches: u32,
    pub rebuffer_pct: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    /// Half-width of the two-sided 95% interval; `None` below two samples.
    pub half_width: Option<f64>,
    pub n: usize,
}

impl MeanCi {
    pub fn low(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean - h)
    }

    pub fn high(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean + h)
    }

    /// True when the two intervals share a point.
    pub fn overlaps(&self, other: &MeanCi) -> bool {
        match (self.low(), self.high(), other.low(), other.high()) {
            (Some(a), Some(b), Some(c), Some(d)) => a <= d && c <= b,
            _ => true,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Student-t interval for the mean of `xs`.
pub fn mean_ci95(xs: &[f64]) -> MeanCi {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return MeanCi { mean: m, half_width: None, n };
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom are positive").inverse_cdf(0.975);
    MeanCi { mean: m, half_width: Some(t * (var / n as f64).sqrt()), n }
}

/// Session means of one run.
pub fn run_row(profile: &str, policy: &str, omega: f64, alpha: f64, eta: f64, seed: u64, qoe: &[SessionQoE]) -> RunRow {
    let col = |f: fn(&SessionQoE) -> f64| mean(&qoe.iter().map(f).collect::<Vec<_>>());
    RunRow {
        profile: profile.into(),
        policy: policy.into(),
        omega,
        alpha,
        eta,
        seed,
        avg_bitrate_mbps: col(|q| q.avg_bitrate / 1e6),
        switch_count_mean: col(|q| q.switch_count as f64),
        rebuffer_pct_mean: col(|q| q.rebuffer_pct),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub profile: String,
    pub policy: String,
    pub omega: f64,
    pub alpha: f64,
    pub eta: f64,
    pub runs: usize,
    pub avg_bitrate_mbps: f64,
    pub avg_bitrate_mbps_ci95: Option<f64>,
    pub switch_count_mean: f64,
    pub switch_count_mean_ci95: Option<f64>,
    pub rebuffer_pct_mean: f64,
    pub rebuffer_pct_mean_ci95: Option<f64>,
}

impl SummaryRow {
    pub fn bitrate(&self) -> MeanCi {
        MeanCi { mean: self.avg_bitrate_mbps, half_width: self.avg_bitrate_mbps_ci95, n: self.runs }
    }

    pub fn switches(&self) -> MeanCi {
        MeanCi { mean: self.switch_count_mean, half_width: self.switch_count_mean_ci95, n: self.runs }
    }

    pub fn rebuffer(&self) -> MeanCi {
        MeanCi { mean: self.rebuffer_pct_mean, half_width: self.rebuffer_pct_mean_ci95, n: self.runs }
    }
}

/// One row per (profile, policy, omega, alpha, eta) in first-seen order,
/// aggregating over seeds.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String, u64, u64, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, String, u64, u64, u64), Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.profile.clone(), r.policy.clone(), r.omega.to_bits(), r.alpha.to_bits(), r.eta.to_bits());
        let g = groups.entry(key.clone()).or_default();
        if g.is_empty() {
            order.push(key);
        }
        g.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let ci = |f: fn(&RunRow) -> f64| mean_ci95(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (b, s, rb) = (ci(|r| r.avg_bitrate_mbps), ci(|r| r.switch_count_mean), ci(|r| r.rebuffer_pct_mean));
            SummaryRow {
                profile: key.0,
                policy: key.1,
                omega: g[0].omega,
                alpha: g[0].alpha,
                eta: g[0].eta,
                runs: g.len(),
                avg_bitrate_mbps: b.mean,
                avg_bitrate_mbps_ci95: b.half_width,
                switch_count_mean: s.mean,
                switch_count_mean_ci95: s.half_width,
                rebuffer_pct_mean: rb.mean,
                rebuffer_pct_mean_ci95: rb.half_width,
            }
        })
        .collect()
}
