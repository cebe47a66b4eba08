//! Shared domain types.
//!
//! Indexing convention: observations are `t_1 .. t_n` with `t_i = t0 + i * dt`.
//! Changepoint slot `i` (1-based, `1 <= i <= n - 1`) marks a change of
//! velocity at `t_i`, between observations `i` and `i + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `d`-dimensional path sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    t0: f64,
    n: usize,
    d: usize,
    /// Row-major `n x d`.
    positions: Vec<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, d: usize, positions: Vec<f64>) -> Result<Self> {
        Self::with_origin(0.0, dt, d, positions)
    }

    pub fn with_origin(t0: f64, dt: f64, d: usize, positions: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTrajectory(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidTrajectory("t0 must be finite".into()));
        }
        if d == 0 {
            return Err(Error::InvalidTrajectory("dimension must be at least 1".into()));
        }
        if positions.len() % d != 0 {
            return Err(Error::InvalidTrajectory(format!(
                "{} coordinates do not form rows of dimension {d}",
                positions.len()
            )));
        }
        let n = positions.len() / d;
        if n < 2 {
            return Err(Error::InvalidTrajectory(format!("need at least 2 observations, got {n}")));
        }
        if let Some(idx) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTrajectory(format!(
                "non-finite coordinate in observation {}",
                idx / d + 1
            )));
        }
        Ok(Self { dt, t0, n, d, positions })
    }

    /// Builds a trajectory from per-observation rows.
    pub fn from_rows(dt: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidTrajectory("rows have differing dimension".into()));
        }
        Self::new(dt, d, rows.concat())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Total observed duration `T = n * dt`.
    pub fn duration(&self) -> f64 {
        self.n as f64 * self.dt
    }

    /// Time of grid index `i` (1-based; `grid_time(0) == t0`).
    pub fn grid_time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Time of the observation stored at 0-based row `row`.
    pub fn time(&self, row: usize) -> f64 {
        self.grid_time(row + 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.time(r)).collect()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.positions[row * self.d..(row + 1) * self.d]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn column(&self, l: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.positions[r * self.d + l]).collect()
    }

    /// Returns a copy with every coordinate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    pub fn max_abs_coordinate(&self) -> f64 {
        self.positions.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Binary changepoint vector `r = (r_1, .., r_{n-1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "ChangepointRepr", try_from = "ChangepointRepr")]
pub struct ChangepointVector {
    n: usize,
    words: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct ChangepointRepr {
    n: usize,
    indices: Vec<usize>,
}

impl From<ChangepointVector> for ChangepointRepr {
    fn from(r: ChangepointVector) -> Self {
        Self { n: r.n, indices: r.indices() }
    }
}

impl TryFrom<ChangepointRepr> for ChangepointVector {
    type Error = Error;

    fn try_from(repr: ChangepointRepr) -> Result<Self> {
        ChangepointVector::from_indices(repr.n, &repr.indices)
    }
}

impl ChangepointVector {
    /// All-zeros vector for `n` observations.
    ///
    /// # Panics
    /// If `n < 2`.
    pub fn empty(n: usize) -> Self {
        assert!(n >= 2, "a changepoint vector needs at least 2 observations");
        Self { n, words: vec![0; (n - 1).div_ceil(64)] }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidChangepoints(format!("n must be >= 2, got {n}")));
        }
        let mut r = Self::empty(n);
        for &i in indices {
            if i == 0 || i >= n {
                return Err(Error::InvalidChangepoints(format!(
                    "index {i} outside 1..={}",
                    n - 1
                )));
            }
            r.set(i);
        }
        Ok(r)
    }

    /// Builds from the `n - 1` raw bits.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut r = Self::empty(bits.len() + 1);
        for (slot, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            r.set(slot + 1);
        }
        r
    }

    /// Interprets the low `n - 1` bits of `mask` as slots `1..n`. Used for
    /// exhaustive enumeration over small `n`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= 64, "from_mask supports n <= 64");
        let mut r = Self::empty(n);
        r.words[0] = mask & low_mask(n - 1);
        r
    }

    /// Iterates over all `2^(n-1)` vectors.
    pub fn all(n: usize) -> impl Iterator<Item = ChangepointVector> {
        assert!((2..=21).contains(&n), "exhaustive enumeration limited to n <= 21");
        (0..(1u64 << (n - 1))).map(move |m| Self::from_mask(n, m))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of slots, `n - 1`.
    pub fn slots(&self) -> usize {
        self.n - 1
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i >= 1 && i < self.n);
        let b = i - 1;
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        debug_assert!(i >= 1 && i < self.n);
        let b = i - 1;
        self.words[b / 64] |= 1 << (b % 64);
    }

    pub fn clear(&mut self, i: usize) {
        debug_assert!(i >= 1 && i < self.n);
        let b = i - 1;
        self.words[b / 64] &= !(1 << (b % 64));
    }

    pub fn toggle(&mut self, i: usize) {
        debug_assert!(i >= 1 && i < self.n);
        let b = i - 1;
        self.words[b / 64] ^= 1 << (b % 64);
    }

    /// `|r|`.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `k = |r| + 1`.
    pub fn num_segments(&self) -> usize {
        self.count() + 1
    }

    /// Sorted changepoint indices `M_1 < .. < M_|r|`.
    pub fn indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                out.push(wi * 64 + b + 1);
                w &= w - 1;
            }
        }
        out
    }

    /// The `rank`-th (0-based) set slot.
    pub fn nth_set(&self, rank: usize) -> Option<usize> {
        self.nth_matching(rank, true)
    }

    /// The `rank`-th (0-based) clear slot.
    pub fn nth_clear(&self, rank: usize) -> Option<usize> {
        self.nth_matching(rank, false)
    }

    fn nth_matching(&self, mut rank: usize, set: bool) -> Option<usize> {
        let slots = self.slots();
        for (wi, &w) in self.words.iter().enumerate() {
            let valid = if (wi + 1) * 64 <= slots { u64::MAX } else { low_mask(slots - wi * 64) };
            let mut bits = if set { w } else { !w } & valid;
            let c = bits.count_ones() as usize;
            if rank < c {
                for _ in 0..rank {
                    bits &= bits - 1;
                }
                return Some(wi * 64 + bits.trailing_zeros() as usize + 1);
            }
            rank -= c;
        }
        None
    }

    /// Number of set slots strictly between `lo` and `hi`.
    pub fn count_between(&self, lo: usize, hi: usize) -> usize {
        (lo + 1..hi).filter(|&i| self.contains(i)).count()
    }

    /// Segment lengths `d_j = M_j - M_{j-1}` with `M_0 = 0`, `M_k = n`.
    pub fn segment_lengths(&self) -> Vec<usize> {
        let mut prev = 0;
        let mut out = Vec::with_capacity(self.num_segments());
        for m in self.indices().into_iter().chain(std::iter::once(self.n)) {
            out.push(m - prev);
            prev = m;
        }
        out
    }

    /// Slots set in exactly one of `self` and `other`.
    pub fn symmetric_difference(&self, other: &Self) -> Vec<usize> {
        assert_eq!(self.n, other.n);
        let mut x = self.clone();
        for (a, b) in x.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
        x.indices()
    }
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Changepoint times `tau_j = M_j * dt` (time origin zero).
pub fn cp_vector_to_times(r: &ChangepointVector, dt: f64) -> Vec<f64> {
    r.indices().into_iter().map(|m| m as f64 * dt).collect()
}

/// Nearest grid slot for each time; inverse of [`cp_vector_to_times`] on the grid.
pub fn times_to_cp_vector(n: usize, dt: f64, taus: &[f64]) -> Result<ChangepointVector> {
    let idx = taus
        .iter()
        .map(|t| {
            let m = (t / dt).round();
            if m.is_finite() && m >= 1.0 {
                Ok(m as usize)
            } else {
                Err(Error::InvalidChangepoints(format!("time {t} is off the grid")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ChangepointVector::from_indices(n, &idx)
}

/// Number of model parameters, `rho = d (k + 1) + 1` for `k` segments.
pub fn parameter_count(d: usize, num_segments: usize) -> usize {
    d * (num_segments + 1) + 1
}

/// A fitted (or ground-truth) continuous piecewise-linear signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub n: usize,
    pub d: usize,
    pub dt: f64,
    pub t0: f64,
    /// Changepoint times, length `k - 1`.
    pub tau: Vec<f64>,
    /// Signal value at time zero.
    pub intercept: Vec<f64>,
    /// Velocity differences, `k x d`; row 0 is the first velocity.
    pub w: Vec<Vec<f64>>,
    /// Segment velocities, `k x d`.
    pub velocities: Vec<Vec<f64>>,
    pub speeds: Vec<f64>,
    pub durations: Vec<f64>,
    pub rss: f64,
    pub sigma2_hat: f64,
}

impl Segmentation {
    /// Assembles a segmentation from the hinge coefficients.
    pub fn from_coefficients(
        traj: &Trajectory,
        tau: Vec<f64>,
        intercept: Vec<f64>,
        w: Vec<Vec<f64>>,
        rss: f64,
    ) -> Self {
        let d = traj.d();
        let mut velocities = Vec::with_capacity(w.len());
        let mut acc = vec![0.0; d];
        for row in &w {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x;
            }
            velocities.push(acc.clone());
        }
        let speeds = velocities.iter().map(|v| euclidean(v)).collect();
        let durations = segment_durations(traj.t0(), traj.duration(), &tau);
        Self {
            n: traj.n(),
            d,
            dt: traj.dt(),
            t0: traj.t0(),
            tau,
            intercept,
            w,
            velocities,
            speeds,
            durations,
            rss,
            sigma2_hat: rss / (d * traj.n()) as f64,
        }
    }

    /// Builds a segmentation from segment velocities instead of differences.
    pub fn from_velocities(
        traj: &Trajectory,
        tau: Vec<f64>,
        intercept: Vec<f64>,
        velocities: &[Vec<f64>],
        rss: f64,
    ) -> Self {
        let w = velocities
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if j == 0 {
                    v.clone()
                } else {
                    v.iter().zip(&velocities[j - 1]).map(|(a, b)| a - b).collect()
                }
            })
            .collect();
        let mut seg = Self::from_coefficients(traj, tau, intercept, w, rss);
        seg.speeds = velocities.iter().map(|v| euclidean(v)).collect();
        seg.velocities = velocities.to_vec();
        seg
    }

    pub fn num_segments(&self) -> usize {
        self.velocities.len()
    }

    pub fn num_changepoints(&self) -> usize {
        self.tau.len()
    }

    /// Evaluates the signal function at time `t`.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let mut out = self.intercept.clone();
        for (l, o) in out.iter_mut().enumerate() {
            *o += self.w[0][l] * t;
            for (j, tau) in self.tau.iter().enumerate() {
                if t > *tau {
                    *o += self.w[j + 1][l] * (t - tau);
                }
            }
        }
        out
    }

    /// Changepoint slots when every `tau` sits on the observation grid.
    pub fn changepoint_vector(&self) -> Result<ChangepointVector> {
        let shifted: Vec<f64> = self.tau.iter().map(|t| t - self.t0).collect();
        times_to_cp_vector(self.n, self.dt, &shifted)
    }
}

fn segment_durations(t0: f64, total: f64, tau: &[f64]) -> Vec<f64> {
    let mut prev = t0;
    let mut out = Vec::with_capacity(tau.len() + 1);
    for &t in tau.iter().chain(std::iter::once(&(t0 + total))) {
        out.push(t - prev);
        prev = t;
    }
    out
}

pub(crate) fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Settings of the penalized criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// sSIC exponent, must exceed 1.
    pub gamma: f64,
    /// Largest speed (um/s) that carries no penalty.
    pub s_cap: f64,
    pub speed_penalty_enabled: bool,
    /// Multiplier on the speed hinge. Anything but 1 departs from the
    /// reference criterion and is meant for experimentation only.
    #[serde(default = "one")]
    pub speed_penalty_weight: f64,
    /// Upper bound on the number of segments.
    #[serde(default)]
    pub k_max: Option<usize>,
}

fn one() -> f64 {
    1.0
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            gamma: 1.01,
            s_cap: 5.0,
            speed_penalty_enabled: true,
            speed_penalty_weight: 1.0,
            k_max: None,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.s_cap > 0.0) {
            return Err(Error::InvalidConfig(format!("s_cap must be positive, got {}", self.s_cap)));
        }
        if !(self.speed_penalty_weight >= 0.0 && self.speed_penalty_weight.is_finite()) {
            return Err(Error::InvalidConfig("speed penalty weight must be >= 0".into()));
        }
        if self.k_max == Some(0) {
            return Err(Error::InvalidConfig("k_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_speed_penalty(mut self, enabled: bool) -> Self {
        self.speed_penalty_enabled = enabled;
        self
    }

    pub fn with_k_max(mut self, k_max: Option<usize>) -> Self {
        self.k_max = k_max;
        self
    }
}

/// Settings of the Metropolis–Hastings search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Changepoint rate (1/s) of the independent proposal.
    pub lambda: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub t_max: usize,
    pub seed: u64,
}

pub const DEFAULT_ITERATIONS: usize = 20_000;

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            u1: 0.25,
            u2: 0.375,
            u3: 0.5,
            t_max: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.u1 && self.u1 < self.u2 && self.u2 < self.u3 && self.u3 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cutpoints must satisfy 0 < u1 < u2 < u3 < 1, got ({}, {}, {})",
                self.u1, self.u2, self.u3
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, t_max: usize) -> Self {
        self.t_max = t_max;
        self
    }

    /// Iteration budget that grows with the path length: `max(2e4, 100 n)`.
    pub fn recommended_iterations(n: usize) -> usize {
        DEFAULT_ITERATIONS.max(100 * n)
    }
}

/// The four proposal moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProposalKind {
    /// Independent Bernoulli vector.
    New,
    /// Add or remove one changepoint.
    BirthDeath,
    /// Add or remove a short segment (two changepoints).
    SegmentBirthDeath,
    /// Move one changepoint to an empty slot.
    Shift,
}

impl ProposalKind {
    pub const ALL: [ProposalKind; 4] =
        [Self::New, Self::BirthDeath, Self::SegmentBirthDeath, Self::Shift];

    /// 1-based type number.
    pub fn number(self) -> u8 {
        match self {
            Self::New => 1,
            Self::BirthDeath => 2,
            Self::SegmentBirthDeath => 3,
            Self::Shift => 4,
        }
    }
}

/// One step of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Score of the state held after this step.
    pub score: f64,
    pub accepted: bool,
    /// `None` for the initial state.
    pub proposal: Option<ProposalKind>,
    pub num_changepoints: usize,
    /// Slots toggled by this step (empty when rejected).
    pub flipped: Vec<usize>,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub initial: ChangepointVector,
    pub records: Vec<IterationRecord>,
    pub best_r: ChangepointVector,
    pub best_score: f64,
    pub best_iter: usize,
}

impl ChainTrace {
    pub fn acceptance_rate(&self) -> f64 {
        let steps = self.records.len().saturating_sub(1);
        if steps == 0 {
            return 0.0;
        }
        self.records.iter().skip(1).filter(|r| r.accepted).count() as f64 / steps as f64
    }

    /// Reconstructs the state held after every recorded step.
    pub fn states(&self) -> impl Iterator<Item = ChangepointVector> + '_ {
        let mut cur = self.initial.clone();
        self.records.iter().map(move |rec| {
            for &i in &rec.flipped {
                cur.toggle(i);
            }
            cur.clone()
        })
    }
}
