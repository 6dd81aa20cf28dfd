//! Throughput-driven bitrate selection with buffer and stall accounting.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::catalog::BitrateRank;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptationParams {
    /// Downshift when the current bitrate exceeds this fraction of the estimate.
    pub drop_threshold: f64,
    /// Weight of the efficiency term against the stability term.
    pub combine_weight: f64,
    /// Throughput samples kept for the estimate.
    pub window: usize,
    /// Consecutive up-eligible decisions required before stepping up.
    pub upshift_patience: u32,
    /// Seconds of media the client tries to keep buffered.
    pub buffer_target: f64,
}

impl Default for AdaptationParams {
    fn default() -> Self {
        AdaptationParams {
            drop_threshold: 0.8,
            combine_weight: 8.0,
            window: 5,
            upshift_patience: 2,
            buffer_target: 16.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AdaptationError {
    #[error("throughput window is empty")]
    EmptyWindow,
    #[error("invalid adaptation parameter: {0}")]
    InvalidParam(&'static str),
}

impl AdaptationParams {
    pub fn validate(&self) -> Result<(), AdaptationError> {
        if !(self.drop_threshold > 0.0 && self.drop_threshold <= 1.0) {
            return Err(AdaptationError::InvalidParam("drop_threshold must be in (0, 1]"));
        }
        if !(self.combine_weight >= 0.0 && self.combine_weight.is_finite()) {
            return Err(AdaptationError::InvalidParam("combine_weight must be non-negative"));
        }
        if self.window == 0 {
            return Err(AdaptationError::InvalidParam("window must be at least 1"));
        }
        if !(self.buffer_target > 0.0 && self.buffer_target.is_finite()) {
            return Err(AdaptationError::InvalidParam("buffer_target must be positive"));
        }
        Ok(())
    }
}

/// Harmonic mean of the throughput samples.
pub fn estimate_bandwidth(window: &[f64]) -> Result<f64, AdaptationError> {
    if window.is_empty() {
        return Err(AdaptationError::EmptyWindow);
    }
    let inv: f64 = window.iter().map(|x| 1.0 / x).sum();
    Ok(window.len() as f64 / inv)
}

/// Highest rank whose bitrate is at most `limit`; rank 1 when none fits.
fn highest_within(ladder: &[f64], limit: f64) -> BitrateRank {
    let idx = ladder.iter().rposition(|&r| r <= limit).unwrap_or(0);
    BitrateRank::from_index(idx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientState {
    pub current: BitrateRank,
    /// Most recent sample last.
    pub throughput: VecDeque<f64>,
    pub buffer: f64,
    pub rebuffer_intervals: Vec<(f64, f64)>,
    pub consecutive_up: u32,
    /// Ranks of recent decisions, for counting switches in the stability score.
    recent: VecDeque<BitrateRank>,
    started: bool,
}

impl Default for ClientState {
    fn default() -> Self {
        Self::new()
    }
}

impl ClientState {
    pub fn new() -> Self {
        ClientState {
            current: BitrateRank::BASE,
            throughput: VecDeque::new(),
            buffer: 0.0,
            rebuffer_intervals: Vec::new(),
            consecutive_up: 0,
            recent: VecDeque::new(),
            started: false,
        }
    }

    pub fn push_throughput(&mut self, bps: f64, params: &AdaptationParams) {
        if bps.is_finite() && bps > 0.0 {
            self.throughput.push_back(bps);
            while self.throughput.len() > params.window {
                self.throughput.pop_front();
            }
        }
    }

    fn switches_in_recent(&self) -> u32 {
        self.recent.iter().zip(self.recent.iter().skip(1)).filter(|(a, b)| a != b).count() as u32
    }

    /// Chooses the rank for the next request and records the decision.
    pub fn decide(&mut self, params: &AdaptationParams, ladder: &[f64]) -> BitrateRank {
        let next = next_bitrate(self, params, ladder);
        if next != self.current {
            self.consecutive_up = 0;
        }
        self.current = next;
        self.recent.push_back(next);
        while self.recent.len() > params.window {
            self.recent.pop_front();
        }
        next
    }

    /// Accounts a segment of `duration` seconds arriving `delay` seconds after
    /// it was requested at `requested_at`. Returns the stall in seconds.
    pub fn on_segment_done(&mut self, requested_at: f64, delay: f64, duration: f64) -> f64 {
        debug_assert!(delay >= 0.0);
        if !self.started {
            // Startup wait is not a stall.
            self.started = true;
            self.buffer = duration;
            return 0.0;
        }
        let stall = (delay - self.buffer).max(0.0);
        if stall > 0.0 {
            let start = requested_at + self.buffer;
            self.rebuffer_intervals.push((start, start + stall));
        }
        self.buffer = (self.buffer - delay).max(0.0) + duration;
        stall
    }

    /// Seconds to wait before the next request so the buffer stays at or
    /// below the target once the next segment lands.
    pub fn pacing_wait(&self, params: &AdaptationParams, duration: f64) -> f64 {
        (self.buffer - (params.buffer_target - duration)).max(0.0)
    }

    /// Lets the buffer play out for `elapsed` seconds of wall time.
    pub fn drain(&mut self, elapsed: f64) {
        self.buffer = (self.buffer - elapsed).max(0.0);
    }

    pub fn rebuffer_time(&self) -> f64 {
        self.rebuffer_intervals.iter().fold(0.0, |t, (a, b)| t + (b - a))
    }

    pub fn has_started(&self) -> bool {
        self.started
    }
}

/// Rank for the next request given the client history. Does not mutate the
/// switch history; `ClientState::decide` does that.
pub fn next_bitrate(state: &mut ClientState, params: &AdaptationParams, ladder: &[f64]) -> BitrateRank {
    let top = BitrateRank::from_index(ladder.len() - 1);
    let Ok(estimate) = estimate_bandwidth(state.throughput.make_contiguous()) else {
        return BitrateRank::BASE;
    };
    let cur = state.current.min(top);
    let reference = highest_within(ladder, estimate);

    if ladder[cur.index()] > params.drop_threshold * estimate {
        state.consecutive_up = 0;
        let target = highest_within(ladder, params.drop_threshold * estimate);
        return target.min(cur.down().unwrap_or(cur));
    }
    if reference <= cur || cur == top {
        state.consecutive_up = 0;
        return cur;
    }
    state.consecutive_up += 1;
    if state.consecutive_up < params.upshift_patience {
        return cur;
    }
    let n = state.switches_in_recent() as i32;
    let r = ladder[reference.index()];
    let stay = libm::pow(2.0, n as f64) + params.combine_weight * libm::fabs(ladder[cur.index()] / r - 1.0);
    let up_rank = cur.up();
    let up = libm::pow(2.0, (n + 1) as f64) + params.combine_weight * libm::fabs(ladder[up_rank.index()] / r - 1.0);
    if up < stay {
        up_rank
    } else {
        cur
    }
}
