//! Exhaustive checks of the proposal kernels and the Metropolis–Hastings
//! transition on small state spaces.

mod common;

use std::collections::HashMap;

use cplass_core::sampler::{
    kernel_log_density, kernel_outcomes, log_acceptance, mh_step, BernoulliPrior, ChainState, Proposal,
};
use cplass_core::{seed, ChangepointVector, McmcConfig, ProposalKind, ProposalMix, ScoreConfig, Scorer};

fn scores(traj: &cplass_core::Trajectory, cfg: &ScoreConfig) -> HashMap<ChangepointVector, f64> {
    ChangepointVector::all(traj.n()).map(|r| {
        let s = cplass_core::score(traj, &r, cfg).total;
        (r, s)
    }).collect()
}

/// Probability of moving from `a` to `b != a` under one kernel.
fn transition(kind: ProposalKind, prior: &BernoulliPrior, s: &HashMap<ChangepointVector, f64>, a: &ChangepointVector, b: &ChangepointVector) -> f64 {
    let fwd = kernel_log_density(kind, prior, a, b);
    if fwd == f64::NEG_INFINITY {
        return 0.0;
    }
    let proposal = Proposal {
        kind,
        r_prop: b.clone(),
        forward_log_density: fwd,
        reverse_log_density: kernel_log_density(kind, prior, b, a),
    };
    fwd.exp() * log_acceptance(s[a], s[b], &proposal).exp()
}

#[test]
fn detailed_balance_holds_for_every_kernel_at_n8() {
    let traj = common::kinked(8, 2, 11, 0.8);
    let cfg = ScoreConfig::default();
    let s = scores(&traj, &cfg);
    let top = s.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let prior = BernoulliPrior::new(8, 1.0, traj.dt());
    let states: Vec<_> = ChangepointVector::all(8).collect();
    let mut checked = 0;
    for kind in ProposalKind::ALL {
        for a in &states {
            for b in &states {
                if a == b {
                    continue;
                }
                let lhs = (s[a] - top).exp() * transition(kind, &prior, &s, a, b);
                let rhs = (s[b] - top).exp() * transition(kind, &prior, &s, b, a);
                let m = lhs.max(rhs);
                if m > 0.0 {
                    assert!((lhs - rhs).abs() / m <= 1e-10, "{kind:?} {:?} -> {:?}: {lhs} vs {rhs}", a.indices(), b.indices());
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}

/// Mass of draws that leave the chain in place because the kernel cannot
/// act, computed from segment lengths rather than by enumerating pairs.
fn impossible_mass(kind: ProposalKind, from: &ChangepointVector) -> f64 {
    let k = from.count();
    let free = from.slots() - k;
    match kind {
        ProposalKind::New => 0.0,
        ProposalKind::BirthDeath => 0.5 * ((k == 0) as u8 + (free == 0) as u8) as f64,
        ProposalKind::SegmentBirthDeath => {
            let delete = if k < 2 { 0.5 } else { 0.0 };
            let insert = if free < 2 {
                0.5
            } else {
                // Free slots inside segment j number (length_j - 1).
                let same: usize = from
                    .segment_lengths()
                    .iter()
                    .map(|&len| len.saturating_sub(1))
                    .map(|f| f * f.saturating_sub(1))
                    .sum();
                0.5 * (1.0 - same as f64 / (free * (free - 1)) as f64)
            };
            delete + insert
        }
        ProposalKind::Shift => ((k == 0 || free == 0) as u8) as f64,
    }
}

#[test]
fn kernels_are_normalized_up_to_n10() {
    for n in 2..=10 {
        let prior = BernoulliPrior::new(n, 1.3, 0.2);
        for kind in ProposalKind::ALL {
            for from in ChangepointVector::all(n) {
                let reachable: f64 = ChangepointVector::all(n)
                    .map(|to| kernel_log_density(kind, &prior, &from, &to).exp())
                    .sum();
                let total = reachable + impossible_mass(kind, &from);
                assert!((total - 1.0).abs() <= 1e-12, "{kind:?} n={n} from {:?}: {total}", from.indices());

                let listed: f64 = kernel_outcomes(kind, &prior, &from).iter().map(|(_, p)| p).sum();
                assert!((listed - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn listed_outcomes_agree_with_closed_form() {
    let n = 9;
    let prior = BernoulliPrior::new(n, 0.7, 0.5);
    for kind in ProposalKind::ALL {
        for from in ChangepointVector::all(n).step_by(7) {
            for (to, p) in kernel_outcomes(kind, &prior, &from) {
                if let Some(to) = to {
                    let q = kernel_log_density(kind, &prior, &from, &to).exp();
                    assert!((p - q).abs() <= 1e-15 * q.max(1e-300), "{kind:?}");
                }
            }
        }
    }
}

#[test]
fn full_mixture_leaves_target_invariant() {
    let traj = common::kinked(8, 1, 5, 0.6);
    let cfg = ScoreConfig::default();
    let s = scores(&traj, &cfg);
    let states: Vec<_> = ChangepointVector::all(8).collect();
    let top = s.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = states.iter().map(|r| (s[r] - top).exp()).sum();
    let pi: Vec<f64> = states.iter().map(|r| (s[r] - top).exp() / z).collect();
    let prior = BernoulliPrior::new(8, 1.0, traj.dt());
    let mix = ProposalMix::default();
    let mut next = vec![0.0; states.len()];
    for (i, a) in states.iter().enumerate() {
        let mut stay = 1.0;
        for (j, b) in states.iter().enumerate() {
            if i == j {
                continue;
            }
            let p: f64 = ProposalKind::ALL.iter().map(|&k| mix.weight(k) * transition(k, &prior, &s, a, b)).sum();
            next[j] += pi[i] * p;
            stay -= p;
        }
        next[i] += pi[i] * stay;
    }
    for (a, b) in pi.iter().zip(&next) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn birth_death_chain_visits_states_in_proportion_to_target() {
    let traj = common::kinked(8, 2, 21, 1.5);
    let cfg = ScoreConfig::default();
    let s = scores(&traj, &cfg);
    let top = s.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = s.values().map(|v| (v - top).exp()).sum();

    let mut scorer = Scorer::new(&traj, cfg);
    let prior = BernoulliPrior::new(8, 1.0, traj.dt());
    let mix = ProposalMix::only(ProposalKind::BirthDeath);
    let mut rng = seed::rng(seed::derive(17, &[1]));
    let r0 = ChangepointVector::empty(8);
    let mut state = ChainState { score: scorer.total(&r0), r: r0 };
    let steps = 10_000;
    let mut visits: HashMap<ChangepointVector, usize> = HashMap::new();
    for it in 0..steps {
        mh_step(&mut state, &mut scorer, &prior, &mix, &mut rng, it);
        *visits.entry(state.r.clone()).or_default() += 1;
    }
    let tv: f64 = 0.5
        * s.iter()
            .map(|(r, v)| ((v - top).exp() / z - *visits.get(r).unwrap_or(&0) as f64 / steps as f64).abs())
            .sum::<f64>();
    assert!(tv < 0.05, "total variation {tv}");
}

#[test]
fn search_attains_exhaustive_maximum_at_n12() {
    let cfg = ScoreConfig::default().with_k_max(Some(3));
    let mut hits = 0;
    for rep in 0..20u64 {
        let traj = common::kinked(12, 2, 100 + rep, 0.6);
        let (_, best) = common::exhaustive_best(&traj, &cfg, 2);
        let mcfg = McmcConfig::default().with_iterations(50_000).with_seed(rep);
        let found = cplass_core::cplass(&traj, &cfg, &mcfg).unwrap();
        if (found.score.total - best).abs() <= 1e-9 * best.abs().max(1.0) {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits}/20");
}
