//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, ToPrimitive, Zero};

use cplass_core::{ChangepointVector, ScoreConfig, Trajectory};

/// Exact fitted values and RSS from the normal equations
/// `(T'T) W = T'Y`, solved over the rationals.
pub struct ExactFit {
    pub fitted: Vec<f64>,
    pub rss: f64,
}

fn q(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite value")
}

pub fn exact_fit(traj: &Trajectory, r: &ChangepointVector) -> ExactFit {
    let (n, d) = (traj.n(), traj.d());
    let dt = q(traj.dt());
    let t0 = q(traj.t0());
    let time = |i: usize| &t0 + &dt * BigRational::from_integer(BigInt::from(i));
    let taus: Vec<BigRational> = r.indices().into_iter().map(time).collect();
    let p = taus.len() + 2;
    let design: Vec<Vec<BigRational>> = (1..=n)
        .map(|i| {
            let t = time(i);
            let mut row = vec![BigRational::from_integer(1.into()), t.clone()];
            for tau in &taus {
                row.push(if &t > tau { &t - tau } else { BigRational::zero() });
            }
            row
        })
        .collect();
    // Augmented system [T'T | T'Y].
    let mut a: Vec<Vec<BigRational>> = (0..p)
        .map(|j| {
            let mut row: Vec<BigRational> = (0..p)
                .map(|k| design.iter().fold(BigRational::zero(), |acc, x| acc + &x[j] * &x[k]))
                .collect();
            for l in 0..d {
                row.push(
                    design
                        .iter()
                        .enumerate()
                        .fold(BigRational::zero(), |acc, (i, x)| acc + &x[j] * q(traj.row(i)[l])),
                );
            }
            row
        })
        .collect();
    for c in 0..p {
        let pivot = (c..p).find(|&r| !a[r][c].is_zero()).expect("full-rank design");
        a.swap(c, pivot);
        let lead = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x = &*x / &lead;
        }
        for r in 0..p {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                let pivot_row = a[c].clone();
                for (x, y) in a[r].iter_mut().zip(&pivot_row) {
                    *x = &*x - &f * y;
                }
            }
        }
    }
    let mut fitted = Vec::with_capacity(n * d);
    let mut rss = BigRational::zero();
    for (i, row) in design.iter().enumerate() {
        for l in 0..d {
            let v = row.iter().enumerate().fold(BigRational::zero(), |acc, (j, x)| acc + x * &a[j][p + l]);
            let e = q(traj.row(i)[l]) - &v;
            rss += &e * &e;
            fitted.push(v.to_f64().unwrap());
        }
    }
    ExactFit { fitted, rss: rss.to_f64().unwrap() }
}

/// Best score over all vectors with at most `max_cps` changepoints, first
/// in enumeration order on ties.
pub fn exhaustive_best(traj: &Trajectory, cfg: &ScoreConfig, max_cps: usize) -> (ChangepointVector, f64) {
    let mut best = (ChangepointVector::empty(traj.n()), f64::NEG_INFINITY);
    for r in ChangepointVector::all(traj.n()) {
        if r.count() > max_cps {
            continue;
        }
        let s = cplass_core::score(traj, &r, cfg).total;
        if s > best.1 {
            best = (r, s);
        }
    }
    best
}

/// Deterministic noisy trajectory with a kink, for small exact checks.
pub fn kinked(n: usize, d: usize, seed: u64, noise: f64) -> Trajectory {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let kink = n / 2;
    let mut pos = Vec::with_capacity(n * d);
    for i in 1..=n {
        for l in 0..d {
            let slope = if i <= kink { 0.3 + 0.1 * l as f64 } else { -0.4 };
            let base = if i <= kink { slope * i as f64 } else { (0.3 + 0.1 * l as f64) * kink as f64 + slope * (i - kink) as f64 };
            pos.push(base + noise * (rng.random::<f64>() - 0.5));
        }
    }
    Trajectory::new(1.0, d, pos).unwrap()
}

/// Random fitting instance: `n <= 20`, `d <= 3`, at most 3 changepoints.
pub fn random_instance(seed: u64) -> (Trajectory, ChangepointVector) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(5..=20);
    let d = rng.random_range(1..=3);
    let k = rng.random_range(0..=3.min(n - 2));
    let dt = [0.05, 0.01, 0.5, 1.0][rng.random_range(0..4)];
    // Slot 1 puts the kink on the first observation, where the hinge column
    // equals `t - t_1` and the design is singular.
    let mut slots: Vec<usize> = (2..n).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        picked.push(slots.swap_remove(rng.random_range(0..slots.len())));
    }
    let r = ChangepointVector::from_indices(n, &picked).unwrap();
    let pos = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
    (Trajectory::new(dt, d, pos).unwrap(), r)
}

/// Largest relative disagreement between the library fit and the exact
/// oracle over fitted values and RSS.
pub fn fit_disagreement(traj: &Trajectory, r: &ChangepointVector) -> f64 {
    let exact = exact_fit(traj, r);
    let seg = cplass_core::fit_given_changepoints(traj, r).expect("fit");
    let scale = traj.max_abs_coordinate().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..traj.n() {
        let got = seg.evaluate(traj.time(i));
        for (l, g) in got.iter().enumerate() {
            let want = exact.fitted[i * traj.d() + l];
            worst = worst.max((g - want).abs() / want.abs().max(scale));
        }
    }
    let rss_scale = exact.rss.max(scale * scale * f64::EPSILON);
    worst.max((seg.rss - exact.rss).abs() / rss_scale)
}
