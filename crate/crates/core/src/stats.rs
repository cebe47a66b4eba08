//! Population summaries over collections of segmentations: cumulative speed
//! allocation (CSA), maximum sustained speed ECDFs, duration-weighted kernel
//! density estimates and path-level bootstrap ensembles.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Segmentation;
use crate::seed;

/// Plot-metadata threshold separating stationary from motile segments
/// (um/s). No statistic here branches on it.
pub const STATIONARY_SPEED_THRESHOLD: f64 = 0.1;

/// Number of points in default evaluation grids.
pub const GRID_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub speed: f64,
    pub duration: f64,
    pub path: usize,
}

/// Segment speeds and durations pooled over paths.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentPool {
    records: Vec<SegmentRecord>,
    total_time: f64,
}

impl SegmentPool {
    pub fn new(records: Vec<SegmentRecord>) -> Result<Self> {
        let mut pool = Self::default();
        for r in records {
            pool.push(r)?;
        }
        Ok(pool)
    }

    pub fn push(&mut self, r: SegmentRecord) -> Result<()> {
        if !(r.duration > 0.0 && r.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!("segment duration must be positive, got {}", r.duration)));
        }
        if !(r.speed >= 0.0 && r.speed.is_finite()) {
            return Err(Error::InvalidConfig(format!("segment speed must be non-negative, got {}", r.speed)));
        }
        self.total_time += r.duration;
        self.records.push(r);
        Ok(())
    }

    /// Pools every segment of every path; the path id is the slice index.
    pub fn from_segmentations<'a, I>(segs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Segmentation>,
    {
        let mut pool = Self::default();
        for (path, seg) in segs.into_iter().enumerate() {
            for (&speed, &duration) in seg.speeds.iter().zip(&seg.durations) {
                pool.push(SegmentRecord { speed, duration, path })?;
            }
        }
        Ok(pool)
    }

    pub fn records(&self) -> &[SegmentRecord] {
        &self.records
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.records.iter().map(|r| r.speed).fold(0.0, f64::max)
    }
}

/// `GRID_POINTS` equally spaced speeds from 0 to `1.05 * max_speed`.
pub fn default_grid(max_speed: f64) -> Vec<f64> {
    let top = if max_speed > 0.0 { 1.05 * max_speed } else { 1.0 };
    linspace(0.0, top, GRID_POINTS)
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

/// A statistic evaluated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    /// `max_i |a_i - b_i|` over a shared grid.
    pub fn sup_distance(&self, other: &Curve) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("curves are on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

pub type CsaCurve = Curve;

/// Fraction of pooled time spent at speeds `<= s`, for every `s` in `grid`.
pub fn csa(pool: &SegmentPool, grid: &[f64]) -> Result<CsaCurve> {
    if pool.is_empty() {
        return Err(Error::Empty("segment pool".into()));
    }
    let mut recs: Vec<(f64, f64)> = pool.records.iter().map(|r| (r.speed, r.duration)).collect();
    recs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut values = vec![0.0; grid.len()];
    let (mut k, mut acc) = (0, 0.0);
    for &g in &order {
        while k < recs.len() && recs[k].0 <= grid[g] {
            acc += recs[k].1;
            k += 1;
        }
        values[g] = if k == recs.len() { 1.0 } else { acc / pool.total_time };
    }
    Ok(Curve { grid: grid.to_vec(), values })
}

/// Empirical distribution function of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Empty("ECDF sample".into()));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidConfig("ECDF sample contains NaN".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `#{x_i <= x} / n`; right-continuous.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn on_grid(&self, grid: &[f64]) -> Curve {
        Curve { grid: grid.to_vec(), values: grid.iter().map(|&x| self.eval(x)).collect() }
    }

    /// Two-sample Kolmogorov–Smirnov distance.
    pub fn ks_distance(&self, other: &Ecdf) -> f64 {
        self.sorted
            .iter()
            .chain(&other.sorted)
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}

/// Per path, the largest speed among segments lasting at least
/// `min_duration`; paths without such a segment are skipped.
pub fn path_max_speeds(segs: &[Segmentation], min_duration: f64) -> Vec<f64> {
    segs.iter()
        .filter_map(|s| {
            s.speeds
                .iter()
                .zip(&s.durations)
                .filter(|(_, &d)| d >= min_duration)
                .map(|(&v, _)| v)
                .reduce(f64::max)
        })
        .collect()
}

pub fn max_speed_ecdf(segs: &[Segmentation], min_duration: f64) -> Result<Ecdf> {
    if !(min_duration >= 0.0) {
        return Err(Error::InvalidConfig(format!("min_duration must be >= 0, got {min_duration}")));
    }
    let maxima = path_max_speeds(segs, min_duration);
    if maxima.is_empty() {
        return Err(Error::Empty(format!("no path has a segment of at least {min_duration} s")));
    }
    Ecdf::new(maxima)
}

fn weighted_moments(pool: &SegmentPool) -> (f64, f64) {
    let w = pool.total_time;
    let mean = pool.records.iter().map(|r| r.speed * r.duration).sum::<f64>() / w;
    let var = pool.records.iter().map(|r| r.duration * (r.speed - mean).powi(2)).sum::<f64>() / w;
    (mean, var.sqrt())
}

fn weighted_quantile(sorted: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let target = q * total;
    let mut acc = 0.0;
    for &(x, w) in sorted {
        acc += w;
        if acc >= target {
            return x;
        }
    }
    sorted.last().map_or(0.0, |p| p.0)
}

/// Silverman's rule on duration-weighted speeds with Kish's effective
/// sample size: `0.9 min(sd, IQR / 1.34) n_eff^(-1/5)`.
pub fn silverman_bandwidth(pool: &SegmentPool) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Empty("segment pool".into()));
    }
    let (_, sd) = weighted_moments(pool);
    let mut sorted: Vec<(f64, f64)> = pool.records.iter().map(|r| (r.speed, r.duration)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let iqr = weighted_quantile(&sorted, pool.total_time, 0.75) - weighted_quantile(&sorted, pool.total_time, 0.25);
    let sum_sq: f64 = pool.records.iter().map(|r| r.duration * r.duration).sum();
    let n_eff = pool.total_time * pool.total_time / sum_sq;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        _ => 1e-3 * pool.max_speed().max(1.0),
    };
    Ok(0.9 * spread * n_eff.powf(-0.2))
}

/// A grid covering the pooled speeds with five bandwidths to spare on each
/// side.
pub fn kde_grid(pool: &SegmentPool, bandwidth: f64) -> Vec<f64> {
    let lo = pool.records.iter().map(|r| r.speed).fold(f64::INFINITY, f64::min);
    let hi = pool.max_speed();
    linspace(lo - 5.0 * bandwidth, hi + 5.0 * bandwidth, GRID_POINTS)
}

/// Gaussian KDE of speeds with weights proportional to durations.
pub fn weighted_kde(pool: &SegmentPool, bandwidth: f64, grid: &[f64]) -> Result<Curve> {
    if pool.is_empty() {
        return Err(Error::Empty("segment pool".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt() * pool.total_time);
    let values = grid
        .iter()
        .map(|&x| {
            pool.records
                .iter()
                .map(|r| r.duration * (-0.5 * ((x - r.speed) / bandwidth).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok(Curve { grid: grid.to_vec(), values })
}

/// Trapezoidal integral of a curve over its grid.
pub fn integrate(curve: &Curve) -> f64 {
    curve.grid.windows(2).zip(curve.values.windows(2)).map(|(g, v)| (g[1] - g[0]) * (v[0] + v[1]) / 2.0).sum()
}

/// Grid indices of local maxima; a flat top counts once, at its first
/// index.
pub fn local_maxima(curve: &Curve) -> Vec<usize> {
    let v = &curve.values;
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < v.len() {
        if v[i] > v[i - 1] {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < v.len() && v[j + 1] < v[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Statistic recomputed on every bootstrap resample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Statistic {
    Csa { grid: Vec<f64> },
    MaxSpeedEcdf { min_duration: f64, grid: Vec<f64> },
}

impl Statistic {
    pub fn grid(&self) -> &[f64] {
        match self {
            Statistic::Csa { grid } | Statistic::MaxSpeedEcdf { grid, .. } => grid,
        }
    }

    pub fn evaluate<'a, I>(&self, paths: I) -> Result<Curve>
    where
        I: IntoIterator<Item = &'a Segmentation>,
    {
        match self {
            Statistic::Csa { grid } => csa(&SegmentPool::from_segmentations(paths)?, grid),
            Statistic::MaxSpeedEcdf { min_duration, grid } => {
                let segs: Vec<Segmentation> = paths.into_iter().cloned().collect();
                Ok(max_speed_ecdf(&segs, *min_duration)?.on_grid(grid))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub grid: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
}

impl Ensemble {
    /// Pointwise empirical quantile (nearest rank) over the ensemble.
    pub fn quantile(&self, q: f64) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                let mut col: Vec<f64> = self.curves.iter().map(|c| c[i]).collect();
                col.sort_by(f64::total_cmp);
                let rank = ((q * col.len() as f64).ceil() as usize).clamp(1, col.len());
                col[rank - 1]
            })
            .collect()
    }

    /// Pointwise `[lo, hi]` quantile band.
    pub fn band(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        (self.quantile(lo), self.quantile(hi))
    }
}

/// Path indices of resample `b`: `n_paths` draws with replacement.
pub fn bootstrap_indices(n_paths: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = seed::rng(seed::derive(seed, &[seed::ROLE_BOOTSTRAP, b as u64]));
    (0..n_paths).map(|_| rng.random_range(0..n_paths)).collect()
}

/// Recomputes `statistic` on `n_boot` path-level resamples. Resample `b` is
/// a pure function of `(seed, b)`, so the result does not depend on the
/// thread schedule.
pub fn bootstrap_ensemble(paths: &[Segmentation], statistic: &Statistic, n_boot: usize, seed: u64) -> Result<Ensemble> {
    if n_boot == 0 {
        return Err(Error::InvalidConfig("n_boot must be >= 1".into()));
    }
    if paths.is_empty() {
        return Err(Error::Empty("no paths to resample".into()));
    }
    let curves = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let idx = bootstrap_indices(paths.len(), seed, b);
            statistic.evaluate(idx.iter().map(|&i| &paths[i])).map(|c| c.values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { grid: statistic.grid().to_vec(), curves })
}
