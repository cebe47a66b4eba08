//! Monte-Carlo studies built on the simulators and the sampler.
//!
//! Every study is a pure function of its spec and the master seed in the
//! supplied [`McmcConfig`]: replicate `i` of cell `c` always receives seeds
//! derived from `(master, tag, c, i, role)`, so results do not depend on
//! how rayon schedules the work. Results embed the configurations used.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{score, Scorer};
use crate::error::{Error, Result};
use crate::model::{ChangepointVector, McmcConfig, ScoreConfig, Segmentation, Trajectory};
use crate::sampler::{cplass, ProposalMix, Sampler};
use crate::seed::{self, ROLE_SEARCH, ROLE_SIMULATE};
use crate::simulate::{simulate_piecewise, simulate_two_state, PiecewiseTruth, Simulated, TwoStateParams};
use crate::stats::{bootstrap_ensemble, csa, default_grid, max_speed_ecdf, SegmentPool, Statistic};

const TAG_ALT: u64 = 1;
const TAG_NULL: u64 = 2;
const TAG_GRID: u64 = 3;
const TAG_TREND: u64 = 4;
const TAG_TYPE3: u64 = 5;
const TAG_TWO_STATE: u64 = 6;

/// Maximum distance, in grid steps, between a detected and a true
/// changepoint for the detection to count as matched.
pub const MATCH_TOLERANCE_STEPS: f64 = 10.0;

/// Runs `f` over `0..count` in parallel, keeping index order.
pub fn replicate<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

fn search_config(mcfg: &McmcConfig, path: &[u64]) -> McmcConfig {
    mcfg.clone().with_seed(seed::derive(mcfg.seed, path))
}

fn sim_seed(mcfg: &McmcConfig, path: &[u64]) -> u64 {
    let mut p = path.to_vec();
    p.push(ROLE_SIMULATE);
    seed::derive(mcfg.seed, &p)
}

fn search_seed_path(path: &[u64]) -> Vec<u64> {
    let mut p = path.to_vec();
    p.push(ROLE_SEARCH);
    p
}

/// Number of changepoints returned by a full search.
pub fn detected_count(traj: &Trajectory, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<usize> {
    Ok(cplass(traj, cfg, mcfg)?.segmentation.num_changepoints())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreProfile {
    pub base_score: f64,
    /// `(index, score of base_r with index added)`.
    pub points: Vec<(usize, f64)>,
}

impl ScoreProfile {
    /// Index with the largest score (first on ties).
    pub fn argmax(&self) -> Option<usize> {
        self.points
            .iter()
            .fold(None, |best: Option<(usize, f64)>, &(i, s)| match best {
                Some((_, b)) if b >= s => best,
                _ => Some((i, s)),
            })
            .map(|(i, _)| i)
    }
}

/// Scores of `base_r` with each candidate index added. Indices already set
/// in `base_r` are skipped.
pub fn score_profile(traj: &Trajectory, base_r: &ChangepointVector, indices: &[usize], cfg: &ScoreConfig) -> Result<ScoreProfile> {
    if base_r.n() != traj.n() {
        return Err(Error::DimensionMismatch(format!("vector for n = {} on path with n = {}", base_r.n(), traj.n())));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i >= traj.n()) {
        return Err(Error::InvalidChangepoints(format!("index {bad} outside 1..{}", traj.n() - 1)));
    }
    let base_score = score(traj, base_r, cfg).total;
    let points = indices
        .par_iter()
        .filter(|&&i| !base_r.contains(i))
        .map(|&i| {
            let mut r = base_r.clone();
            r.set(i);
            (i, score(traj, &r, cfg).total)
        })
        .collect();
    Ok(ScoreProfile { base_score, points })
}

/// Scores of every two-changepoint model on a strided grid, relative to the
/// model without changepoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSurface {
    pub indices: Vec<usize>,
    pub baseline: f64,
    /// `values[a][b]` for `indices[a] < indices[b]`; `None` elsewhere.
    pub values: Vec<Vec<Option<f64>>>,
}

impl ScoreSurface {
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, row) in self.values.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    if best.is_none_or(|(_, _, s)| v > s) {
                        best = Some((self.indices[a], self.indices[b], v));
                    }
                }
            }
        }
        best.map(|(a, b, _)| (a, b))
    }

    /// Cells strictly larger than all defined 4-neighbours.
    pub fn strict_local_maxima(&self) -> Vec<(usize, usize)> {
        let m = self.indices.len();
        let mut out = Vec::new();
        for a in 0..m {
            for b in 0..m {
                let Some(v) = self.values[a][b] else { continue };
                let neighbours = [(a.wrapping_sub(1), b), (a + 1, b), (a, b.wrapping_sub(1)), (a, b + 1)];
                let is_max = neighbours.iter().all(|&(x, y)| {
                    x >= m || y >= m || self.values[x][y].is_none_or(|w| v > w)
                });
                if is_max {
                    out.push((self.indices[a], self.indices[b]));
                }
            }
        }
        out
    }
}

pub fn score_surface_2cp(traj: &Trajectory, stride: usize, cfg: &ScoreConfig) -> Result<ScoreSurface> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    let n = traj.n();
    let indices: Vec<usize> = (1..n).step_by(stride).collect();
    let baseline = score(traj, &ChangepointVector::empty(n), cfg).total;
    let values = indices
        .par_iter()
        .map(|&i| {
            indices
                .iter()
                .map(|&j| {
                    (i < j).then(|| {
                        let r = ChangepointVector::from_indices(n, &[i, j]).expect("indices in range");
                        score(traj, &r, cfg).total - baseline
                    })
                })
                .collect()
        })
        .collect();
    Ok(ScoreSurface { indices, baseline, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSweepSpec {
    pub alternative: PiecewiseTruth,
    pub null: PiecewiseTruth,
    pub gammas: Vec<f64>,
    pub replicates: usize,
    /// Speed-penalty settings to evaluate for every gamma.
    pub speed_penalty: Vec<bool>,
}

impl GammaSweepSpec {
    /// The 2.65 s, 20 Hz setup with gammas 1.0 (exclusive) to 2.0.
    pub fn short_panel(replicates: usize) -> Self {
        Self {
            alternative: PiecewiseTruth::short_panel(),
            null: PiecewiseTruth::stationary(53),
            gammas: vec![1.01, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0],
            replicates,
            speed_penalty: vec![true, false],
        }
    }

    /// The 10.15 s, 20 Hz setup.
    pub fn long_panel(replicates: usize) -> Self {
        Self {
            alternative: PiecewiseTruth::long_panel(),
            null: PiecewiseTruth::stationary(203),
            ..Self::short_panel(replicates)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub speed_penalty: bool,
    /// Fraction of alternative paths with exactly the true number of
    /// changepoints.
    pub detection_rate: f64,
    /// Fraction of null paths with at least one changepoint.
    pub false_positive_rate: f64,
    pub alternative_counts: Vec<usize>,
    pub null_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSweepResult {
    pub spec: GammaSweepSpec,
    pub score_config: ScoreConfig,
    pub mcmc_config: McmcConfig,
    pub rows: Vec<GammaRow>,
}

/// Detection and false-positive rates per gamma. The same simulated paths
/// and chain seeds are reused for every gamma and penalty setting.
pub fn gamma_sweep(spec: &GammaSweepSpec, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<GammaSweepResult> {
    let true_k = spec.alternative.tau.len();
    let alt_paths = replicate(spec.replicates, |i| simulate_piecewise(&spec.alternative, sim_seed(mcfg, &[TAG_ALT, i as u64])))?;
    let null_paths = replicate(spec.replicates, |i| simulate_piecewise(&spec.null, sim_seed(mcfg, &[TAG_NULL, i as u64])))?;
    let mut rows = Vec::new();
    for &gamma in &spec.gammas {
        for &penalty in &spec.speed_penalty {
            let c = cfg.clone().with_gamma(gamma).with_speed_penalty(penalty);
            c.validate()?;
            let counts = |paths: &[Simulated], tag: u64| {
                replicate(paths.len(), |i| {
                    detected_count(&paths[i].trajectory, &c, &search_config(mcfg, &search_seed_path(&[tag, i as u64])))
                })
            };
            let alternative_counts = counts(&alt_paths, TAG_ALT)?;
            let null_counts = counts(&null_paths, TAG_NULL)?;
            let frac = |v: &[usize], pred: &dyn Fn(usize) -> bool| v.iter().filter(|&&k| pred(k)).count() as f64 / v.len().max(1) as f64;
            rows.push(GammaRow {
                gamma,
                speed_penalty: penalty,
                detection_rate: frac(&alternative_counts, &|k| k == true_k),
                false_positive_rate: frac(&null_counts, &|k| k > 0),
                alternative_counts,
                null_counts,
            });
        }
    }
    Ok(GammaSweepResult { spec: spec.clone(), score_config: cfg.clone(), mcmc_config: mcfg.clone(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGridSpec {
    pub durations: Vec<f64>,
    pub speeds: Vec<f64>,
    pub replicates: usize,
}

impl PowerGridSpec {
    /// Durations 0.05..=1.0 s and speeds 0.01..=0.2 um/s, 20 values each.
    pub fn full(replicates: usize) -> Self {
        Self {
            durations: (1..=20).map(|i| i as f64 * 0.05).collect(),
            speeds: (1..=20).map(|i| i as f64 * 0.01).collect(),
            replicates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGridResult {
    pub durations: Vec<f64>,
    pub speeds: Vec<f64>,
    /// `p_correct[duration][speed]`.
    pub p_correct: Vec<Vec<f64>>,
    pub replicates: usize,
    pub score_config: ScoreConfig,
    pub mcmc_config: McmcConfig,
}

/// Fraction of replicates detecting exactly two changepoints, per middle
/// segment duration and speed.
pub fn power_grid(spec: &PowerGridSpec, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<PowerGridResult> {
    let cells: Vec<(usize, usize, usize)> = (0..spec.durations.len())
        .flat_map(|a| (0..spec.speeds.len()).flat_map(move |b| (0..spec.replicates).map(move |i| (a, b, i))))
        .collect();
    let hits = replicate(cells.len(), |c| {
        let (a, b, i) = cells[c];
        let truth = PiecewiseTruth::flanked_run(spec.durations[a], spec.speeds[b])?;
        let label = [TAG_GRID, a as u64, b as u64, i as u64];
        let sim = simulate_piecewise(&truth, sim_seed(mcfg, &label))?;
        let k = detected_count(&sim.trajectory, cfg, &search_config(mcfg, &search_seed_path(&label)))?;
        Ok(k == 2)
    })?;
    let mut p_correct = vec![vec![0.0; spec.speeds.len()]; spec.durations.len()];
    for (&(a, b, _), hit) in cells.iter().zip(hits) {
        if hit {
            p_correct[a][b] += 1.0 / spec.replicates as f64;
        }
    }
    Ok(PowerGridResult {
        durations: spec.durations.clone(),
        speeds: spec.speeds.clone(),
        p_correct,
        replicates: spec.replicates,
        score_config: cfg.clone(),
        mcmc_config: mcfg.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySpec {
    pub n_values: Vec<usize>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub iterations: usize,
    pub correct_fraction: f64,
    /// Median over correctly sized fits of `max_i |tau_hat_i - tau_i|`;
    /// `None` when no replicate had the true count.
    pub median_location_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub spec: ConsistencySpec,
    pub score_config: ScoreConfig,
    pub mcmc_config: McmcConfig,
    pub rows: Vec<ConsistencyRow>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

/// Correct-count fraction and location error on the fixed 8 s truth as the
/// sampling rate grows. Each `n` runs `max(t_max, 100 n)` iterations.
pub fn consistency_trend(spec: &ConsistencySpec, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<ConsistencyResult> {
    let mut rows = Vec::new();
    for &n in &spec.n_values {
        let truth = PiecewiseTruth::fixed_horizon(n)?;
        let iterations = mcfg.t_max.max(100 * n);
        let errors = replicate(spec.replicates, |i| {
            let label = [TAG_TREND, n as u64, i as u64];
            let sim = simulate_piecewise(&truth, sim_seed(mcfg, &label))?;
            let m = search_config(mcfg, &search_seed_path(&label)).with_iterations(iterations);
            let seg = cplass(&sim.trajectory, cfg, &m)?.segmentation;
            Ok((seg.tau.len() == truth.tau.len()).then(|| {
                seg.tau.iter().zip(&truth.tau).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            }))
        })?;
        let mut matched: Vec<f64> = errors.iter().flatten().copied().collect();
        rows.push(ConsistencyRow {
            n,
            iterations,
            correct_fraction: matched.len() as f64 / spec.replicates.max(1) as f64,
            median_location_error: median(&mut matched),
        });
    }
    Ok(ConsistencyResult { spec: spec.clone(), score_config: cfg.clone(), mcmc_config: mcfg.clone(), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type3Spec {
    pub truth: PiecewiseTruth,
    pub path_seed: u64,
    pub chains: usize,
    /// Iteration cap per chain; chains that never reach the pair count as
    /// the cap.
    pub cap: usize,
    /// Allowed distance of each changepoint from the truth, in grid steps.
    pub tolerance: usize,
}

impl Type3Spec {
    pub fn standard() -> Self {
        Self { truth: PiecewiseTruth::short_run(0.05), path_seed: 1, chains: 20, cap: 400_000, tolerance: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type3Result {
    pub spec: Type3Spec,
    pub score_empty: f64,
    pub score_first: f64,
    pub score_second: f64,
    pub score_pair: f64,
    /// First iteration at the true pair, starting from no changepoints.
    pub full_hits: Vec<usize>,
    /// Same for the chain without the segment birth / death move.
    pub restricted_hits: Vec<usize>,
    pub full_median: f64,
    pub restricted_median: f64,
    pub score_config: ScoreConfig,
    pub mcmc_config: McmcConfig,
}

impl Type3Result {
    pub fn ordering_holds(&self) -> bool {
        self.score_pair > self.score_empty && self.score_empty > self.score_first && self.score_empty > self.score_second
    }

    pub fn slowdown(&self) -> f64 {
        self.restricted_median / self.full_median
    }
}

/// Iteration at which a chain started from the empty vector first sits at
/// `target` (within `tolerance` steps per changepoint), or `cap`.
pub fn first_hit(
    traj: &Trajectory,
    cfg: &ScoreConfig,
    mcfg: &McmcConfig,
    mix: ProposalMix,
    target: &[usize],
    tolerance: usize,
    cap: usize,
) -> Result<usize> {
    let mut sampler = Sampler::new(traj, cfg, mcfg)?.with_mix(mix);
    let mut state = sampler.state_at(ChangepointVector::empty(traj.n()));
    let near = |r: &ChangepointVector| {
        let idx = r.indices();
        idx.len() == target.len() && idx.iter().zip(target).all(|(a, b)| a.abs_diff(*b) <= tolerance)
    };
    for iter in 1..=cap {
        sampler.step(&mut state, iter);
        if near(&state.r) {
            return Ok(iter);
        }
    }
    Ok(cap)
}

/// Scores around the short fast run and first-passage times of the full
/// and the restricted (no segment birth / death) chains.
pub fn type3_demo(spec: &Type3Spec, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<Type3Result> {
    let sim = simulate_piecewise(&spec.truth, spec.path_seed)?;
    let traj = &sim.trajectory;
    let target = sim.truth.changepoint_vector()?.indices();
    if target.len() != 2 {
        return Err(Error::InvalidConfig("the truth must have two changepoints on the grid".into()));
    }
    let n = traj.n();
    let scorer = Scorer::new(traj, cfg.clone());
    let s = |idx: &[usize]| -> Result<f64> { Ok(scorer.breakdown(&ChangepointVector::from_indices(n, idx)?).total) };
    let (score_empty, score_first, score_second, score_pair) = (s(&[])?, s(&target[..1])?, s(&target[1..])?, s(&target)?);
    let full = ProposalMix::from_config(mcfg);
    let restricted = ProposalMix::from_weights([
        full.weight(crate::sampler::ProposalKind::New),
        full.weight(crate::sampler::ProposalKind::BirthDeath),
        0.0,
        full.weight(crate::sampler::ProposalKind::Shift),
    ])?;
    let hits = |mix: ProposalMix| {
        replicate(spec.chains, |i| {
            let m = search_config(mcfg, &[TAG_TYPE3, i as u64, ROLE_SEARCH]);
            first_hit(traj, cfg, &m, mix, &target, spec.tolerance, spec.cap)
        })
    };
    let full_hits = hits(full)?;
    let restricted_hits = hits(restricted)?;
    let med = |v: &[usize]| median(&mut v.iter().map(|&x| x as f64).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    Ok(Type3Result {
        spec: spec.clone(),
        score_empty,
        score_first,
        score_second,
        score_pair,
        full_median: med(&full_hits),
        restricted_median: med(&restricted_hits),
        full_hits,
        restricted_hits,
        score_config: cfg.clone(),
        mcmc_config: mcfg.clone(),
    })
}

/// One simulated two-state path with its ground truth and detection.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStateOutcome {
    pub truth: Segmentation,
    pub detected: Segmentation,
}

/// Simulates `paths` two-state trajectories and runs a full search on each.
/// Path `i` uses the same data and chain seed for any `cfg`.
pub fn two_state_detections(params: &TwoStateParams, paths: usize, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<Vec<TwoStateOutcome>> {
    replicate(paths, |i| {
        let label = [TAG_TWO_STATE, i as u64];
        let sim = simulate_two_state(params, sim_seed(mcfg, &label))?;
        let det = cplass(&sim.trajectory, cfg, &search_config(mcfg, &search_seed_path(&label)))?;
        Ok(TwoStateOutcome { truth: sim.truth, detected: det.segmentation })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedPenaltyResult {
    pub paths: usize,
    pub counts_on: Vec<usize>,
    pub counts_off: Vec<usize>,
    /// Fraction of paths with equal counts.
    pub agreement: f64,
    pub max_speed_on: f64,
    pub max_speed_off: f64,
    pub score_config: ScoreConfig,
    pub mcmc_config: McmcConfig,
}

/// Detected changepoint counts with the speed penalty on and off.
pub fn speed_penalty_study(params: &TwoStateParams, paths: usize, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<SpeedPenaltyResult> {
    let on = two_state_detections(params, paths, &cfg.clone().with_speed_penalty(true), mcfg)?;
    let off = two_state_detections(params, paths, &cfg.clone().with_speed_penalty(false), mcfg)?;
    let counts = |v: &[TwoStateOutcome]| v.iter().map(|o| o.detected.num_changepoints()).collect::<Vec<_>>();
    let top = |v: &[TwoStateOutcome]| v.iter().flat_map(|o| o.detected.speeds.iter().copied()).fold(0.0, f64::max);
    let (counts_on, counts_off) = (counts(&on), counts(&off));
    let agree = counts_on.iter().zip(&counts_off).filter(|(a, b)| a == b).count();
    Ok(SpeedPenaltyResult {
        paths,
        agreement: agree as f64 / paths.max(1) as f64,
        max_speed_on: top(&on),
        max_speed_off: top(&off),
        counts_on,
        counts_off,
        score_config: cfg.clone(),
        mcmc_config: mcfg.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsaFidelityResult {
    pub paths: usize,
    pub n_boot: usize,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub inferred: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub sup_distance: f64,
    /// Fraction of grid points where the truth lies inside the band.
    pub coverage: f64,
    /// KS distance between inferred and true maximum-sustained-speed ECDFs.
    pub max_speed_ks: Option<f64>,
    pub score_config: ScoreConfig,
    pub mcmc_config: McmcConfig,
}

/// Minimum duration for a segment to count towards the maximum sustained
/// speed.
pub const SUSTAINED_DURATION: f64 = 0.6;

/// Compares the CSA of detected segments with the CSA of the true segments;
/// the band is the pointwise 2.5 %–97.5 % range of a path bootstrap of the
/// detected CSA.
pub fn csa_fidelity(params: &TwoStateParams, paths: usize, n_boot: usize, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<CsaFidelityResult> {
    let outcomes = two_state_detections(params, paths, cfg, mcfg)?;
    let truths: Vec<Segmentation> = outcomes.iter().map(|o| o.truth.clone()).collect();
    let detected: Vec<Segmentation> = outcomes.into_iter().map(|o| o.detected).collect();
    let tp = SegmentPool::from_segmentations(&truths)?;
    let dp = SegmentPool::from_segmentations(&detected)?;
    let grid = default_grid(tp.max_speed().max(dp.max_speed()));
    let truth = csa(&tp, &grid)?;
    let inferred = csa(&dp, &grid)?;
    let ens = bootstrap_ensemble(&detected, &Statistic::Csa { grid: grid.clone() }, n_boot, seed::derive(mcfg.seed, &[TAG_TWO_STATE]))?;
    let (band_lo, band_hi) = ens.band(0.025, 0.975);
    let inside = (0..grid.len()).filter(|&i| band_lo[i] <= truth.values[i] && truth.values[i] <= band_hi[i]).count();
    let max_speed_ks = match (max_speed_ecdf(&truths, SUSTAINED_DURATION), max_speed_ecdf(&detected, SUSTAINED_DURATION)) {
        (Ok(a), Ok(b)) => Some(a.ks_distance(&b)),
        _ => None,
    };
    Ok(CsaFidelityResult {
        paths,
        n_boot,
        sup_distance: truth.sup_distance(&inferred)?,
        coverage: inside as f64 / grid.len() as f64,
        grid,
        truth: truth.values,
        inferred: inferred.values,
        band_lo,
        band_hi,
        max_speed_ks,
        score_config: cfg.clone(),
        mcmc_config: mcfg.clone(),
    })
}
