//! Synthetic trajectories with known ground truth.
//!
//! Two generators are provided: an explicit continuous piecewise-linear
//! anchor observed with isotropic Gaussian noise, and a two-state
//! (stationary / motile) cargo model.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Segmentation, Trajectory};
use crate::seed::{self, StreamRng};

/// A simulated path together with the signal that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub trajectory: Trajectory,
    pub truth: Segmentation,
    /// Motion state of every ground-truth segment.
    pub states: Vec<MotionState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionState {
    Stationary,
    Motile,
}

/// A continuous piecewise-linear anchor with Gaussian observation noise.
///
/// Times are `t_i = i dt` for `i = 1..=n`; `intercept` is the anchor value at
/// time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTruth {
    pub tau: Vec<f64>,
    pub velocities: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub sigma: f64,
    pub dt: f64,
    pub n: usize,
}

/// Unit vector along the diagonal of the first two axes, used to turn a
/// scalar speed into a planar velocity.
const DIAGONAL: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

impl PiecewiseTruth {
    pub fn new(tau: Vec<f64>, velocities: Vec<Vec<f64>>, intercept: Vec<f64>, sigma: f64, dt: f64, n: usize) -> Result<Self> {
        let t = Self { tau, velocities, intercept, sigma, dt, n };
        t.validate()?;
        Ok(t)
    }

    /// A planar truth whose segments move along the diagonal at the given
    /// speeds, starting at the origin.
    pub fn planar(tau: Vec<f64>, speeds: &[f64], sigma: f64, dt: f64, n: usize) -> Result<Self> {
        let velocities = speeds.iter().map(|s| DIAGONAL.iter().map(|u| s * u).collect()).collect();
        Self::new(tau, velocities, vec![0.0, 0.0], sigma, dt, n)
    }

    /// 20 Hz for 30 s, changes at 10 s and 20 s, velocities
    /// (0.1, -0.1), (0, 0), (-0.1, 0.1), noise 0.1.
    pub fn crossing_diagonals() -> Self {
        Self::new(
            vec![10.0, 20.0],
            vec![vec![0.1, -0.1], vec![0.0, 0.0], vec![-0.1, 0.1]],
            vec![0.0, 0.0],
            0.1,
            0.05,
            600,
        )
        .expect("valid preset")
    }

    /// 100 Hz for 6 s with a 0.5 s run at 0.2 um/s starting at 3 s.
    pub fn short_run(sigma: f64) -> Self {
        Self::planar(vec![3.0, 3.5], &[0.0, 0.2, 0.0], sigma, 0.01, 600).expect("valid preset")
    }

    /// 20 Hz, n = 53, run at 0.1 um/s between 1.1 s and 1.55 s, noise 0.01.
    pub fn short_panel() -> Self {
        Self::planar(vec![1.1, 1.55], &[0.0, 0.1, 0.0], 0.01, 0.05, 53).expect("valid preset")
    }

    /// 20 Hz, n = 203, run at 0.15 um/s between 5 s and 5.15 s, noise 0.01.
    pub fn long_panel() -> Self {
        Self::planar(vec![5.0, 5.15], &[0.0, 0.15, 0.0], 0.01, 0.05, 203).expect("valid preset")
    }

    /// Stationary path of `n` samples at 20 Hz with noise 0.01.
    pub fn stationary(n: usize) -> Self {
        Self::planar(vec![], &[0.0], 0.01, 0.05, n).expect("valid preset")
    }

    /// Two 2 s stationary flanks around a middle run of the given duration
    /// and speed; 20 Hz, noise 0.01.
    pub fn flanked_run(duration: f64, speed: f64) -> Result<Self> {
        let dt = 0.05;
        let n = ((4.0 + duration) / dt).round() as usize;
        Self::planar(vec![2.0, 2.0 + duration], &[0.0, speed, 0.0], 0.01, dt, n)
    }

    /// Fixed 8 s truth with changes at 3 s and 5 s observed with `n`
    /// samples; used for the large-sample trend.
    pub fn fixed_horizon(n: usize) -> Result<Self> {
        Self::new(
            vec![3.0, 5.0],
            vec![vec![0.05, 0.0], vec![0.25, 0.1], vec![-0.05, 0.05]],
            vec![0.0, 0.0],
            0.1,
            8.0 / n as f64,
            n,
        )
    }

    pub fn d(&self) -> usize {
        self.intercept.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        let d = self.d();
        if d == 0 {
            return bad("intercept must have at least one coordinate".into());
        }
        if self.velocities.len() != self.tau.len() + 1 {
            return bad(format!("{} velocities for {} changepoints", self.velocities.len(), self.tau.len()));
        }
        if self.velocities.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return bad(format!("every velocity needs {d} finite coordinates"));
        }
        let end = self.n as f64 * self.dt;
        let mut prev = 0.0;
        for &t in &self.tau {
            if !(t > prev && t < end) {
                return bad(format!("changepoint {t} not increasing inside (0, {end})"));
            }
            prev = t;
        }
        if self.velocities.windows(2).any(|w| w[0] == w[1]) {
            return bad("consecutive segments must have different velocities".into());
        }
        Ok(())
    }

    /// The noise-free anchor sampled on the grid, as a trajectory.
    fn anchor_trajectory(&self) -> Result<(Trajectory, Segmentation)> {
        let d = self.d();
        let placeholder = Trajectory::new(self.dt, d, vec![0.0; self.n * d])?;
        let truth = Segmentation::from_velocities(&placeholder, self.tau.clone(), self.intercept.clone(), &self.velocities, 0.0);
        Ok((sample_anchor(&placeholder, &truth)?, truth))
    }
}

/// Evaluates `seg` on the grid of `grid` in one pass over the segments.
fn sample_anchor(grid: &Trajectory, seg: &Segmentation) -> Result<Trajectory> {
    let d = grid.d();
    let mut pos = Vec::with_capacity(grid.n() * d);
    // Value of the anchor at the start of segment `j`.
    let mut j = 0;
    let mut start = 0.0;
    let mut base = seg.intercept.clone();
    for i in 1..=grid.n() {
        let t = grid.grid_time(i);
        while j < seg.tau.len() && t > seg.tau[j] {
            let end = seg.tau[j];
            for (b, v) in base.iter_mut().zip(&seg.velocities[j]) {
                *b += v * (end - start);
            }
            start = end;
            j += 1;
        }
        pos.extend(base.iter().zip(&seg.velocities[j]).map(|(b, v)| b + v * (t - start)));
    }
    Trajectory::new(grid.dt(), d, pos)
}

/// Adds isotropic noise to the sampled anchor and records the realized
/// residual sum of squares on the truth.
fn observe(anchor: &Trajectory, sigma: f64, rng: &mut StreamRng) -> Result<(Trajectory, f64)> {
    let mut rss = 0.0;
    let pos: Vec<f64> = anchor
        .positions()
        .iter()
        .map(|&x| {
            let e: f64 = rng.sample(StandardNormal);
            rss += (sigma * e) * (sigma * e);
            x + sigma * e
        })
        .collect();
    Ok((Trajectory::new(anchor.dt(), anchor.d(), pos)?, rss))
}

fn state_of(speed: f64) -> MotionState {
    if speed == 0.0 {
        MotionState::Stationary
    } else {
        MotionState::Motile
    }
}

pub fn simulate_piecewise(truth: &PiecewiseTruth, seed: u64) -> Result<Simulated> {
    truth.validate()?;
    let (anchor, seg) = truth.anchor_trajectory()?;
    let mut rng = seed::rng(seed);
    let (trajectory, rss) = observe(&anchor, truth.sigma, &mut rng)?;
    let truth = Segmentation::from_velocities(&trajectory, seg.tau, seg.intercept, &seg.velocities, rss);
    let states = truth.speeds.iter().map(|&s| state_of(s)).collect();
    Ok(Simulated { trajectory, truth, states })
}

/// How the two-state parameters drive state switching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchingScheme {
    /// `p` and `q` are applied at every grid step; each motile step moves at
    /// the speed drawn on entering the motile state and updates its
    /// direction.
    PerStep,
    /// `p` and `q` are applied at segment ends. Stationary segments last an
    /// exponential time with mean `mean_stationary`; motile segments cover an
    /// exponential distance with mean `mean_distance` at a Gamma speed.
    PerSegment,
}

/// Parameters of the stationary / motile cargo model. Speeds follow
/// `Gamma(alpha, rate beta)` in nm/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateParams {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p_reverse: f64,
    pub p_continue: f64,
    pub sigma_cargo: f64,
    pub dt: f64,
    /// Seconds.
    pub mean_stationary: f64,
    /// Nanometres.
    pub mean_distance: f64,
    pub scheme: SwitchingScheme,
}

/// The simulated horizon is this many times the observed duration; only the
/// final window is kept.
pub const BURN_IN_FACTOR: usize = 5;

impl TwoStateParams {
    /// The reference parameter set at 25 Hz.
    pub fn base() -> Self {
        Self {
            n: 200,
            d: 2,
            p: 1.0,
            q: 0.5,
            alpha: 8.0,
            beta: 0.02,
            p_reverse: 0.3,
            p_continue: 0.3,
            sigma_cargo: 0.1,
            dt: 0.04,
            mean_stationary: 5.0,
            mean_distance: 300.0,
            scheme: SwitchingScheme::PerSegment,
        }
    }

    pub fn with_scheme(mut self, scheme: SwitchingScheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Mean motile speed in um/s.
    pub fn mean_speed(&self) -> f64 {
        self.alpha / self.beta / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, v) in [("p", self.p), ("q", self.q), ("p_reverse", self.p_reverse), ("p_continue", self.p_continue)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.p_reverse + self.p_continue > 1.0 + 1e-12 {
            return bad("p_reverse + p_continue must not exceed 1".into());
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return bad(format!("alpha and beta must be positive, got {} and {}", self.alpha, self.beta));
        }
        if self.n < 2 || self.d == 0 {
            return bad(format!("need n >= 2 and d >= 1, got n = {}, d = {}", self.n, self.d));
        }
        if !(self.dt > 0.0 && self.sigma_cargo >= 0.0) {
            return bad("dt must be positive and sigma_cargo non-negative".into());
        }
        if self.scheme == SwitchingScheme::PerSegment && !(self.mean_stationary > 0.0 && self.mean_distance > 0.0) {
            return bad("mean_stationary and mean_distance must be positive".into());
        }
        Ok(())
    }
}

/// Uniform random unit vector in `d` dimensions.
fn random_direction(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Direction after a motile step or segment: reverse, keep or resample.
/// Kept in one place so alternative conventions can be swapped in.
fn next_direction(rng: &mut StreamRng, dir: &[f64], p: &TwoStateParams) -> Vec<f64> {
    let u: f64 = rng.random();
    if u < p.p_reverse {
        dir.iter().map(|x| -x).collect()
    } else if u < p.p_reverse + p.p_continue {
        dir.to_vec()
    } else {
        random_direction(rng, p.d)
    }
}

struct Piece {
    duration: f64,
    velocity: Vec<f64>,
    state: MotionState,
}

fn speed_law(p: &TwoStateParams) -> Gamma<f64> {
    Gamma::new(p.alpha, 1.0 / p.beta).expect("validated shape and rate")
}

fn pieces_per_step(p: &TwoStateParams, horizon: f64, rng: &mut StreamRng) -> Vec<Piece> {
    let speeds = speed_law(p);
    let steps = (horizon / p.dt).ceil() as usize;
    let mut motile = rng.random_bool(0.5);
    let mut speed = 0.0;
    let mut dir = random_direction(rng, p.d);
    let mut out = Vec::with_capacity(steps);
    for step in 0..steps {
        let was = motile;
        if step > 0 {
            motile = if motile { !rng.random_bool(p.q) } else { rng.random_bool(p.p) };
        }
        if motile {
            if !was || step == 0 {
                speed = speeds.sample(rng) / 1000.0;
                dir = random_direction(rng, p.d);
            } else {
                dir = next_direction(rng, &dir, p);
            }
            out.push(Piece { duration: p.dt, velocity: dir.iter().map(|u| u * speed).collect(), state: MotionState::Motile });
        } else {
            out.push(Piece { duration: p.dt, velocity: vec![0.0; p.d], state: MotionState::Stationary });
        }
    }
    out
}

fn pieces_per_segment(p: &TwoStateParams, horizon: f64, rng: &mut StreamRng) -> Vec<Piece> {
    let speeds = speed_law(p);
    let stationary = Exp::new(1.0 / p.mean_stationary).expect("positive mean");
    let distance = Exp::new(1.0 / p.mean_distance).expect("positive mean");
    let mut motile = rng.random_bool(0.5);
    let mut dir: Option<Vec<f64>> = None;
    let mut elapsed = 0.0;
    let mut out = Vec::new();
    while elapsed < horizon {
        if motile {
            let speed_nm = speeds.sample(rng);
            let duration = distance.sample(rng) / speed_nm;
            let d = match &dir {
                Some(prev) => next_direction(rng, prev, p),
                None => random_direction(rng, p.d),
            };
            let speed = speed_nm / 1000.0;
            out.push(Piece { duration, velocity: d.iter().map(|u| u * speed).collect(), state: MotionState::Motile });
            dir = Some(d);
            elapsed += duration;
            motile = !rng.random_bool(p.q);
        } else {
            let duration = stationary.sample(rng);
            out.push(Piece { duration, velocity: vec![0.0; p.d], state: MotionState::Stationary });
            dir = None;
            elapsed += duration;
            motile = rng.random_bool(p.p);
        }
    }
    out
}

/// Clips the pieces to `[start, start + len]`, re-origins time at `start`
/// and merges neighbours with equal velocity.
fn window(pieces: Vec<Piece>, start: f64, len: f64) -> Vec<Piece> {
    let end = start + len;
    let mut out: Vec<Piece> = Vec::new();
    let mut t = 0.0;
    for piece in pieces {
        let (a, b) = (t, t + piece.duration);
        t = b;
        let (lo, hi) = (a.max(start), b.min(end));
        if hi <= lo {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.velocity == piece.velocity => last.duration += hi - lo,
            _ => out.push(Piece { duration: hi - lo, ..piece }),
        }
    }
    out
}

pub fn simulate_two_state(params: &TwoStateParams, seed: u64) -> Result<Simulated> {
    params.validate()?;
    let mut rng = seed::rng(seed);
    let len = params.n as f64 * params.dt;
    let horizon = len * BURN_IN_FACTOR as f64;
    let pieces = match params.scheme {
        SwitchingScheme::PerStep => pieces_per_step(params, horizon, &mut rng),
        SwitchingScheme::PerSegment => pieces_per_segment(params, horizon, &mut rng),
    };
    let pieces = window(pieces, horizon - len, len);
    let mut tau = Vec::with_capacity(pieces.len().saturating_sub(1));
    let mut acc = 0.0;
    for piece in &pieces[..pieces.len() - 1] {
        acc += piece.duration;
        tau.push(acc);
    }
    // Floating-point accumulation can push a boundary onto the window end.
    tau.retain(|&t| t < len);
    let velocities: Vec<Vec<f64>> = pieces.iter().take(tau.len() + 1).map(|p| p.velocity.clone()).collect();
    let states = pieces.iter().take(tau.len() + 1).map(|p| p.state).collect();
    let d = params.d;
    let placeholder = Trajectory::new(params.dt, d, vec![0.0; params.n * d])?;
    let anchor_seg = Segmentation::from_velocities(&placeholder, tau, vec![0.0; d], &velocities, 0.0);
    let anchor = sample_anchor(&placeholder, &anchor_seg)?;
    let (trajectory, rss) = observe(&anchor, params.sigma_cargo, &mut rng)?;
    let truth = Segmentation::from_velocities(&trajectory, anchor_seg.tau, anchor_seg.intercept, &velocities, rss);
    Ok(Simulated { trajectory, truth, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_given_changepoints;

    #[test]
    fn noiseless_piecewise_lies_on_anchor() {
        let truth = PiecewiseTruth { sigma: 0.0, ..PiecewiseTruth::short_panel() };
        let sim = simulate_piecewise(&truth, 3).unwrap();
        for i in 0..sim.trajectory.n() {
            let want = sim.truth.evaluate(sim.trajectory.time(i));
            for (a, b) in sim.trajectory.row(i).iter().zip(&want) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        let r = sim.truth.changepoint_vector().unwrap();
        assert_eq!(r.indices(), vec![22, 31]);
        let fit = fit_given_changepoints(&sim.trajectory, &r).unwrap();
        assert!(fit.rss < 1e-20, "{}", fit.rss);
    }

    #[test]
    fn short_panel_matches_setup() {
        let t = PiecewiseTruth::short_panel();
        assert_eq!(t.n, 53);
        assert!((t.n as f64 * t.dt - 2.65).abs() < 1e-12);
        let sim = simulate_piecewise(&t, 1).unwrap();
        let s = &sim.truth.speeds;
        assert!((s[0]).abs() < 1e-15 && (s[1] - 0.1).abs() < 1e-15 && s[2].abs() < 1e-15);
        assert_eq!(sim.states, vec![MotionState::Stationary, MotionState::Motile, MotionState::Stationary]);
    }

    #[test]
    fn flanked_run_sizes() {
        assert_eq!(PiecewiseTruth::flanked_run(0.05, 0.01).unwrap().n, 81);
        assert_eq!(PiecewiseTruth::flanked_run(1.0, 0.2).unwrap().n, 100);
    }

    #[test]
    fn residual_variance_matches_sigma() {
        let truth = PiecewiseTruth::planar(vec![], &[0.1], 0.3, 0.05, 20).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for rep in 0..10_000u64 {
            let sim = simulate_piecewise(&truth, seed::derive(99, &[rep])).unwrap();
            for i in 0..sim.trajectory.n() {
                let a = sim.truth.evaluate(sim.trajectory.time(i));
                for (y, m) in sim.trajectory.row(i).iter().zip(&a) {
                    sum += (y - m).powi(2);
                    count += 1;
                }
            }
        }
        let var = sum / count as f64;
        assert!((var / 0.09 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn truth_refit_error_shrinks_with_noise() {
        let mut errs = Vec::new();
        for sigma in [1e-2, 1e-4, 1e-6] {
            let truth = PiecewiseTruth { sigma, ..PiecewiseTruth::crossing_diagonals() };
            let sim = simulate_piecewise(&truth, 5).unwrap();
            let fit = fit_given_changepoints(&sim.trajectory, &sim.truth.changepoint_vector().unwrap()).unwrap();
            let err = fit
                .velocities
                .iter()
                .zip(&truth.velocities)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn invalid_truths_are_rejected() {
        assert!(PiecewiseTruth::planar(vec![2.0, 1.0], &[0.0, 0.1, 0.0], 0.1, 0.05, 100).is_err());
        assert!(PiecewiseTruth::planar(vec![1.0], &[0.1, 0.1], 0.1, 0.05, 100).is_err());
        assert!(PiecewiseTruth::planar(vec![6.0], &[0.0, 0.1], 0.1, 0.05, 100).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let p = TwoStateParams::base();
        assert_eq!(simulate_two_state(&p, 4).unwrap(), simulate_two_state(&p, 4).unwrap());
        assert_ne!(simulate_two_state(&p, 4).unwrap().trajectory, simulate_two_state(&p, 5).unwrap().trajectory);
    }

    fn check_invariants(sim: &Simulated) {
        let t = &sim.truth;
        let total: f64 = t.durations.iter().sum();
        assert!((total - sim.trajectory.duration()).abs() < 1e-9);
        assert!(t.durations.iter().all(|&d| d > 0.0));
        assert_eq!(t.velocities.len(), t.tau.len() + 1);
        assert_eq!(sim.states.len(), t.velocities.len());
        assert!((t.sigma2_hat * (t.d * t.n) as f64 - t.rss).abs() < 1e-12);
    }

    #[test]
    fn noiseless_two_state_reproduces_anchor() {
        for scheme in [SwitchingScheme::PerSegment, SwitchingScheme::PerStep] {
            let p = TwoStateParams { sigma_cargo: 0.0, ..TwoStateParams::base().with_scheme(scheme) };
            for seed in 0..5 {
                let sim = simulate_two_state(&p, seed).unwrap();
                check_invariants(&sim);
                for i in 0..sim.trajectory.n() {
                    let want = sim.truth.evaluate(sim.trajectory.time(i));
                    for (a, b) in sim.trajectory.row(i).iter().zip(&want) {
                        assert!((a - b).abs() < 1e-12);
                    }
                }
                for (state, speed) in sim.states.iter().zip(&sim.truth.speeds) {
                    assert_eq!(*state == MotionState::Stationary, *speed == 0.0);
                }
            }
        }
    }

    #[test]
    fn per_step_motile_runs_are_geometric() {
        let p = TwoStateParams { n: 100_000, sigma_cargo: 0.0, ..TwoStateParams::base().with_scheme(SwitchingScheme::PerStep) };
        let mut runs = Vec::new();
        let mut seed = 0;
        while runs.len() < 100_000 {
            let sim = simulate_two_state(&p, seed).unwrap();
            seed += 1;
            let mut current: Option<f64> = None;
            let mut local = Vec::new();
            for (state, d) in sim.states.iter().zip(&sim.truth.durations) {
                match (state, current.as_mut()) {
                    (MotionState::Motile, Some(acc)) => *acc += d,
                    (MotionState::Motile, None) => current = Some(*d),
                    (MotionState::Stationary, _) => {
                        if let Some(acc) = current.take() {
                            local.push(acc);
                        }
                    }
                }
            }
            // The first run may be censored by the window start.
            runs.extend(local.into_iter().skip(1));
        }
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        // Geometric number of steps with success probability q: mean dt / q,
        // standard deviation dt sqrt(1 - q) / q.
        let se = 0.04 * 0.5f64.sqrt() / 0.5 / (runs.len() as f64).sqrt();
        assert!((mean - 0.08).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn single_motile_segment_without_switching() {
        let p = TwoStateParams {
            q: 0.0,
            p_reverse: 0.0,
            p_continue: 1.0,
            sigma_cargo: 0.0,
            ..TwoStateParams::base().with_scheme(SwitchingScheme::PerStep)
        };
        let mut saw_motile = false;
        for seed in 0..10 {
            let sim = simulate_two_state(&p, seed).unwrap();
            check_invariants(&sim);
            if sim.states[0] == MotionState::Motile {
                saw_motile = true;
                assert_eq!(sim.truth.num_segments(), 1);
            }
        }
        assert!(saw_motile);
    }

    #[test]
    fn per_segment_moments() {
        let p = TwoStateParams { n: 5000, sigma_cargo: 0.0, ..TwoStateParams::base() };
        let mut stationary = Vec::new();
        let mut travelled = Vec::new();
        for seed in 0..40 {
            let sim = simulate_two_state(&p, seed).unwrap();
            let k = sim.states.len();
            for j in 1..k.saturating_sub(1) {
                let d = sim.truth.durations[j];
                match sim.states[j] {
                    MotionState::Stationary => stationary.push(d),
                    MotionState::Motile => travelled.push(d * sim.truth.speeds[j] * 1000.0),
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // Exponential laws: standard error is mean / sqrt(count).
        let (ms, md) = (mean(&stationary), mean(&travelled));
        assert!((ms - 5.0).abs() < 4.0 * 5.0 / (stationary.len() as f64).sqrt(), "{ms}");
        assert!((md - 300.0).abs() < 4.0 * 300.0 / (travelled.len() as f64).sqrt(), "{md}");
    }
}
