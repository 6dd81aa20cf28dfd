//! Video corpus, popularity and session arrivals.
//!
//! Every file shares the same segment count and bitrate ladder. Segment
//! sizes are deterministic: `bitrate * duration / 8` bytes.

use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

/// 1-based position of an encoding in the bitrate ladder (rank 1 is the base bitrate).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitrateRank(u8);

impl BitrateRank {
    pub const BASE: BitrateRank = BitrateRank(1);

    /// Panics on rank 0.
    pub const fn new(rank: u8) -> Self {
        assert!(rank >= 1, "bitrate ranks start at 1");
        BitrateRank(rank)
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    /// Zero-based ladder index.
    pub const fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub const fn from_index(index: usize) -> Self {
        BitrateRank(index as u8 + 1)
    }

    /// The next lower rank, if any.
    pub fn down(self) -> Option<Self> {
        (self.0 > 1).then(|| BitrateRank(self.0 - 1))
    }

    pub fn up(self) -> Self {
        BitrateRank(self.0 + 1)
    }
}

impl fmt::Display for BitrateRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B{}", self.0)
    }
}

/// A cacheable unit: segment `segment` of file `file` encoded at `rank`.
/// File and segment indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentId {
    pub file: u32,
    pub segment: u32,
    pub rank: BitrateRank,
}

impl SegmentId {
    pub const fn new(file: u32, segment: u32, rank: BitrateRank) -> Self {
        SegmentId { file, segment, rank }
    }

    /// Total order used for every deterministic tie-break: higher bitrate
    /// first, then ascending file, then ascending segment.
    pub fn tie_order(&self, other: &Self) -> core::cmp::Ordering {
        other.rank.cmp(&self.rank).then(self.file.cmp(&other.file)).then(self.segment.cmp(&other.segment))
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/Video{}/{}/{}", self.file, self.segment, self.rank)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("bitrate ladder is empty")]
    EmptyLadder,
    #[error("bitrate ladder must be strictly ascending and positive")]
    UnorderedLadder,
    #[error("catalog needs at least one file and one segment per file")]
    EmptyCatalog,
    #[error("segment duration must be finite and non-negative")]
    InvalidDuration,
    #[error("bitrate ladders above 255 rungs are not supported")]
    LadderTooLong,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    files: u32,
    segments: u32,
    ladder: Vec<f64>,
    segment_duration: f64,
}

impl Catalog {
    pub fn new(files: u32, segments: u32, ladder: Vec<f64>, segment_duration: f64) -> Result<Self, CatalogError> {
        if ladder.is_empty() {
            return Err(CatalogError::EmptyLadder);
        }
        if ladder.len() > u8::MAX as usize {
            return Err(CatalogError::LadderTooLong);
        }
        if ladder[0] <= 0.0 || ladder.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CatalogError::UnorderedLadder);
        }
        if files == 0 || segments == 0 {
            return Err(CatalogError::EmptyCatalog);
        }
        if !segment_duration.is_finite() || segment_duration < 0.0 {
            return Err(CatalogError::InvalidDuration);
        }
        Ok(Catalog { files, segments, ladder, segment_duration })
    }

    pub fn files(&self) -> u32 {
        self.files
    }

    pub fn segments(&self) -> u32 {
        self.segments
    }

    /// Bitrates in bits/second, ascending.
    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }

    pub fn bitrate(&self, rank: BitrateRank) -> f64 {
        self.ladder[rank.index()]
    }

    pub fn rank_count(&self) -> usize {
        self.ladder.len()
    }

    pub fn top_rank(&self) -> BitrateRank {
        BitrateRank::from_index(self.ladder.len() - 1)
    }

    pub fn ranks(&self) -> impl DoubleEndedIterator<Item = BitrateRank> + Clone {
        (0..self.ladder.len()).map(BitrateRank::from_index)
    }

    pub fn segment_duration(&self) -> f64 {
        self.segment_duration
    }

    pub fn contains(&self, s: SegmentId) -> bool {
        (1..=self.files).contains(&s.file)
            && (1..=self.segments).contains(&s.segment)
            && s.rank.index() < self.ladder.len()
    }

    /// Size in bytes of any segment encoded at `rank`.
    pub fn segment_size(&self, rank: BitrateRank) -> u64 {
        libm::round(self.bitrate(rank) * self.segment_duration / 8.0) as u64
    }

    /// Segment size relative to the base bitrate segment.
    pub fn mu(&self, rank: BitrateRank) -> f64 {
        // Equal durations make the size ratio a bitrate ratio; this stays
        // defined when the duration is zero.
        self.bitrate(rank) / self.ladder[0]
    }

    pub fn mu_table(&self) -> Vec<f64> {
        self.ranks().map(|r| self.mu(r)).collect()
    }

    /// Bytes needed to hold every segment of every file at every bitrate.
    pub fn total_bytes(&self) -> u64 {
        let per_segment: u64 = self.ranks().map(|r| self.segment_size(r)).sum();
        per_segment * self.files as u64 * self.segments as u64
    }

    /// Every segment of the corpus, in `SegmentId` order.
    pub fn all_segments(&self) -> impl Iterator<Item = SegmentId> + '_ {
        (1..=self.files).flat_map(move |f| {
            (1..=self.segments).flat_map(move |k| self.ranks().map(move |r| SegmentId::new(f, k, r)))
        })
    }
}

/// Normalized Zipf popularity: `w_f ∝ 1 / f^alpha` for `f = 1..=files`.
pub fn zipf_weights(files: u32, alpha: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=files).map(|f| 1.0 / libm::pow(f as f64, alpha)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConsumerId(pub u32);

impl fmt::Display for ConsumerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Session {
    pub id: u32,
    pub consumer: ConsumerId,
    pub start: f64,
    pub file: u32,
}

/// Sessions sorted by start time (ties by consumer).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionSchedule {
    sessions: Vec<Session>,
}

impl SessionSchedule {
    /// Sorts and renumbers the given sessions.
    pub fn from_sessions(mut sessions: Vec<Session>) -> Self {
        sessions.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.consumer.cmp(&b.consumer)));
        for (i, s) in sessions.iter_mut().enumerate() {
            s.id = i as u32;
        }
        SessionSchedule { sessions }
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Sessions that start strictly before `t`, keeping their ids.
    pub fn before(&self, t: f64) -> SessionSchedule {
        SessionSchedule { sessions: self.sessions.iter().copied().filter(|s| s.start < t).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Workload {
    /// Mean time between two session starts of one consumer, seconds.
    pub mean_interval: f64,
    /// Sessions start in `[0, horizon)`.
    pub horizon: f64,
    /// Zipf skew of file popularity.
    pub alpha: f64,
}

/// Independent Poisson session arrivals per consumer, files drawn by Zipf popularity.
pub fn sample_sessions(catalog: &Catalog, consumers: &[ConsumerId], workload: &Workload, seed: u64) -> SessionSchedule {
    assert!(workload.mean_interval > 0.0, "mean session interval must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(1.0 / workload.mean_interval).expect("positive rate");
    let files = WeightedIndex::new(zipf_weights(catalog.files(), workload.alpha)).expect("zipf weights are positive");
    let mut sessions = Vec::new();
    for &consumer in consumers {
        let mut t: f64 = gap.sample(&mut rng);
        while t < workload.horizon {
            let file = files.sample(&mut rng) as u32 + 1;
            sessions.push(Session { id: 0, consumer, start: t, file });
            t += gap.sample(&mut rng);
        }
    }
    SessionSchedule::from_sessions(sessions)
}
