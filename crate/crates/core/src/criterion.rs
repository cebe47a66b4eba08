//! The penalized criterion
//! `score(r) = -(n d / 2) ln(RSS_r) - (ln n)^gamma * rho - sum_j max(0, s_j - s_cap)`.
//!
//! Logarithms are natural. The additive likelihood constant is dropped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_given_changepoints;
use crate::model::{parameter_count, ChangepointVector, ScoreConfig, Segmentation, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub log_rss_term: f64,
    pub ssic_term: f64,
    pub speed_term: f64,
    pub total: f64,
    pub rho: usize,
}

impl ScoreBreakdown {
    fn degenerate(rho: usize) -> Self {
        Self {
            log_rss_term: f64::NEG_INFINITY,
            ssic_term: f64::NAN,
            speed_term: f64::NAN,
            total: f64::NEG_INFINITY,
            rho,
        }
    }

    /// True when the model could not be fitted (or exceeds `k_max`); the
    /// total is then minus infinity.
    pub fn is_degenerate(&self) -> bool {
        self.total == f64::NEG_INFINITY
    }
}

/// `(ln n)^gamma * (d (k + 1) + 1)`.
pub fn ssic_penalty(n: usize, d: usize, num_changepoints: usize, gamma: f64) -> f64 {
    (n as f64).ln().powf(gamma) * parameter_count(d, num_changepoints + 1) as f64
}

/// Hinge penalty on segment speeds above the cap; zero when disabled.
pub fn speed_penalty(speeds: &[f64], cfg: &ScoreConfig) -> f64 {
    if !cfg.speed_penalty_enabled {
        return 0.0;
    }
    cfg.speed_penalty_weight * speeds.iter().map(|s| (s - cfg.s_cap).max(0.0)).sum::<f64>()
}

/// Full penalty for a changepoint vector whose fitted speeds are `speeds`.
pub fn penalty(r: &ChangepointVector, speeds: &[f64], cfg: &ScoreConfig, n: usize, d: usize) -> Result<f64> {
    if speeds.len() != r.num_segments() {
        return Err(Error::DimensionMismatch(format!(
            "{} speeds for {} segments",
            speeds.len(),
            r.num_segments()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidTrajectory(format!("n must be >= 2, got {n}")));
    }
    Ok(ssic_penalty(n, d, r.count(), cfg.gamma) + speed_penalty(speeds, cfg))
}

/// Lower clamp applied to the RSS before taking its logarithm.
///
/// An RSS below the floating-point noise of the coordinates carries no
/// information, so fits that are exact up to round-off all share this value.
pub fn rss_floor(traj: &Trajectory) -> f64 {
    let per_entry = 64.0 * f64::EPSILON * traj.max_abs_coordinate();
    ((traj.n() * traj.d()) as f64 * per_entry * per_entry).max(1e-300)
}

fn breakdown_from_fit(traj: &Trajectory, seg: &Segmentation, cfg: &ScoreConfig, floor: f64) -> ScoreBreakdown {
    let nd = (traj.n() * traj.d()) as f64;
    let log_rss_term = -0.5 * nd * seg.rss.max(floor).ln();
    let ssic_term = ssic_penalty(traj.n(), traj.d(), seg.num_changepoints(), cfg.gamma);
    let speed_term = speed_penalty(&seg.speeds, cfg);
    ScoreBreakdown {
        log_rss_term,
        ssic_term,
        speed_term,
        total: log_rss_term - ssic_term - speed_term,
        rho: parameter_count(traj.d(), seg.num_segments()),
    }
}

fn exceeds_k_max(r: &ChangepointVector, cfg: &ScoreConfig) -> bool {
    cfg.k_max.is_some_and(|k| r.num_segments() > k)
}

/// Scores `r` on `traj`. Degenerate fits and vectors with more than `k_max`
/// segments score minus infinity.
pub fn score(traj: &Trajectory, r: &ChangepointVector, cfg: &ScoreConfig) -> ScoreBreakdown {
    let rho = parameter_count(traj.d(), r.num_segments());
    if exceeds_k_max(r, cfg) {
        return ScoreBreakdown::degenerate(rho);
    }
    match fit_given_changepoints(traj, r) {
        Ok(seg) => breakdown_from_fit(traj, &seg, cfg, rss_floor(traj)),
        Err(_) => ScoreBreakdown::degenerate(rho),
    }
}

/// Scores an already fitted segmentation of `traj`.
pub fn score_segmentation(traj: &Trajectory, seg: &Segmentation, cfg: &ScoreConfig) -> ScoreBreakdown {
    breakdown_from_fit(traj, seg, cfg, rss_floor(traj))
}

/// Memoizing scorer bound to one trajectory and configuration.
pub struct Scorer<'a> {
    traj: &'a Trajectory,
    cfg: ScoreConfig,
    floor: f64,
    cache: HashMap<ChangepointVector, f64>,
    evaluations: usize,
}

const CACHE_LIMIT: usize = 1 << 20;

impl<'a> Scorer<'a> {
    pub fn new(traj: &'a Trajectory, cfg: ScoreConfig) -> Self {
        Self { traj, floor: rss_floor(traj), cfg, cache: HashMap::new(), evaluations: 0 }
    }

    pub fn trajectory(&self) -> &'a Trajectory {
        self.traj
    }

    pub fn config(&self) -> &ScoreConfig {
        &self.cfg
    }

    /// Number of fits performed (cache misses).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn admits(&self, r: &ChangepointVector) -> bool {
        !exceeds_k_max(r, &self.cfg)
    }

    pub fn total(&mut self, r: &ChangepointVector) -> f64 {
        if let Some(s) = self.cache.get(r) {
            return *s;
        }
        let s = self.breakdown(r).total;
        self.evaluations += 1;
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(r.clone(), s);
        s
    }

    pub fn breakdown(&self, r: &ChangepointVector) -> ScoreBreakdown {
        if exceeds_k_max(r, &self.cfg) {
            return ScoreBreakdown::degenerate(parameter_count(self.traj.d(), r.num_segments()));
        }
        match fit_given_changepoints(self.traj, r) {
            Ok(seg) => breakdown_from_fit(self.traj, &seg, &self.cfg, self.floor),
            Err(_) => ScoreBreakdown::degenerate(parameter_count(self.traj.d(), r.num_segments())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy_1d(n: usize, dt: f64) -> Trajectory {
        // deterministic pseudo-noise
        let ys: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i + 1) as f64 * dt;
                0.2 * t + 0.05 * ((i as f64 * 12.9898).sin() * 43758.5453).fract()
            })
            .collect();
        Trajectory::new(dt, 1, ys).unwrap()
    }

    #[test]
    fn ssic_term_for_two_changepoints_in_two_dimensions() {
        let got = ssic_penalty(100, 2, 2, 1.01);
        // rho = 2 * 4 + 1 = 9; value from a 40-digit evaluation
        let want = 42.084_352_600_426_080_755_834_9;
        assert!((got - want).abs() <= 1e-13 * want, "{got}");
    }

    #[test]
    fn speeds_below_cap_cost_nothing() {
        let cfg = ScoreConfig::default();
        assert_eq!(speed_penalty(&[0.1, 0.2], &cfg), 0.0);
    }

    #[test]
    fn speed_above_cap_costs_the_excess() {
        let cfg = ScoreConfig::default();
        let p = speed_penalty(&[0.1, 5.3, 1.0], &cfg);
        assert!((p - 0.3).abs() < 1e-12);
        assert_eq!(speed_penalty(&[0.1, 5.3], &cfg.clone().with_speed_penalty(false)), 0.0);
    }

    #[test]
    fn penalty_rejects_wrong_speed_count() {
        let r = ChangepointVector::from_indices(10, &[3]).unwrap();
        let err = penalty(&r, &[0.1], &ScoreConfig::default(), 10, 1).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn equal_complexity_scores_differ_by_log_rss_only() {
        let traj = noisy_1d(30, 0.1);
        let cfg = ScoreConfig::default();
        let a = ChangepointVector::from_indices(30, &[10, 20]).unwrap();
        let b = ChangepointVector::from_indices(30, &[5, 25]).unwrap();
        let (sa, sb) = (score(&traj, &a, &cfg), score(&traj, &b, &cfg));
        let ra = fit_given_changepoints(&traj, &a).unwrap().rss;
        let rb = fit_given_changepoints(&traj, &b).unwrap().rss;
        let want = -15.0 * (ra.ln() - rb.ln());
        assert!((sa.total - sb.total - want).abs() < 1e-9);
    }

    #[test]
    fn breakdown_is_consistent() {
        let traj = noisy_1d(30, 0.1);
        let r = ChangepointVector::from_indices(30, &[12]).unwrap();
        let s = score(&traj, &r, &ScoreConfig::default());
        assert_eq!(s.total, s.log_rss_term - s.ssic_term - s.speed_term);
        assert_eq!(s.rho, 2 * 1 + 1 + 1);
    }

    #[test]
    fn degenerate_fit_scores_minus_infinity() {
        let traj = noisy_1d(4, 1.0);
        let r = ChangepointVector::from_indices(4, &[1, 2, 3]).unwrap();
        let s = score(&traj, &r, &ScoreConfig::default());
        assert!(s.is_degenerate());
        assert_eq!(s.total, f64::NEG_INFINITY);
    }

    #[test]
    fn k_max_excludes_larger_models() {
        let traj = noisy_1d(20, 0.1);
        let cfg = ScoreConfig::default().with_k_max(Some(2));
        let ok = ChangepointVector::from_indices(20, &[5]).unwrap();
        let too_many = ChangepointVector::from_indices(20, &[5, 9]).unwrap();
        assert!(score(&traj, &ok, &cfg).total.is_finite());
        assert!(score(&traj, &too_many, &cfg).is_degenerate());
    }

    #[test]
    fn scorer_caches() {
        let traj = noisy_1d(20, 0.1);
        let mut s = Scorer::new(&traj, ScoreConfig::default());
        let r = ChangepointVector::from_indices(20, &[5]).unwrap();
        let a = s.total(&r);
        let b = s.total(&r);
        assert_eq!(a, b);
        assert_eq!(s.evaluations(), 1);
        assert_eq!(a, score(&traj, &r, &ScoreConfig::default()).total);
    }

    #[test]
    fn perfect_fit_is_clamped() {
        let traj = Trajectory::new(1.0, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = score(&traj, &ChangepointVector::empty(4), &ScoreConfig::default());
        assert!(s.total.is_finite());
        assert!((s.log_rss_term + 2.0 * rss_floor(&traj).ln()).abs() < 1e-9);
    }
}
