//! Metropolis–Hastings search over changepoint vectors.
//!
//! Four proposal kernels are mixed by a uniform draw `u_r` against the
//! cutpoints `u1 < u2 < u3`:
//!
//! | `u_r` range      | kernel                                    |
//! |------------------|-------------------------------------------|
//! | `[0, u1]`        | independent Bernoulli(1 - e^{-lambda dt}) |
//! | `(u1, u2]`       | birth / death of one changepoint          |
//! | `(u2, u3]`       | birth / death of a segment (two points)   |
//! | `(u3, 1]`        | shift of one changepoint                  |
//!
//! Each kernel reports the exact forward and reverse proposal densities, so
//! the acceptance ratio targets `exp(score)`. A draw that lands on an
//! impossible branch (for example a deletion from the empty vector) has
//! forward density zero and is rejected without scoring.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::{ScoreBreakdown, Scorer};
use crate::error::{Error, Result};
use crate::fit::fit_given_changepoints;
pub use crate::model::ProposalKind;
use crate::model::{ChainTrace, ChangepointVector, IterationRecord, McmcConfig, ScoreConfig, Segmentation, Trajectory};
use crate::seed::{self, StreamRng};

/// A proposed move with its log proposal densities under the chosen kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub kind: ProposalKind,
    pub r_prop: ChangepointVector,
    /// `ln q(r_prop | r_cur)`; minus infinity for an impossible draw.
    pub forward_log_density: f64,
    /// `ln q(r_cur | r_prop)`.
    pub reverse_log_density: f64,
}

impl Proposal {
    fn impossible(kind: ProposalKind, r_cur: &ChangepointVector) -> Self {
        Self {
            kind,
            r_prop: r_cur.clone(),
            forward_log_density: f64::NEG_INFINITY,
            reverse_log_density: f64::NEG_INFINITY,
        }
    }

    pub fn is_possible(&self) -> bool {
        self.forward_log_density > f64::NEG_INFINITY
    }
}

/// The i.i.d. Bernoulli law of the independent proposal and of the initial
/// state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliPrior {
    n: usize,
    p: f64,
    log_on: f64,
    log_off: f64,
}

impl BernoulliPrior {
    /// Changepoint probability `1 - exp(-lambda dt)` per slot.
    pub fn new(n: usize, lambda: f64, dt: f64) -> Self {
        let x = lambda * dt;
        let p = -(-x).exp_m1();
        Self { n, p, log_on: p.ln(), log_off: -x }
    }

    pub fn probability(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_density(&self, r: &ChangepointVector) -> f64 {
        let on = r.count();
        let off = self.n - 1 - on;
        let mut s = 0.0;
        if on > 0 {
            s += on as f64 * self.log_on;
        }
        if off > 0 {
            s += off as f64 * self.log_off;
        }
        s
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChangepointVector {
        let mut r = ChangepointVector::empty(self.n);
        for i in 1..self.n {
            if rng.random::<f64>() < self.p {
                r.set(i);
            }
        }
        r
    }
}

/// Type 1: a fresh vector from the Bernoulli prior, independent of `r_cur`.
pub fn propose_new<R: Rng + ?Sized>(rng: &mut R, prior: &BernoulliPrior, r_cur: &ChangepointVector) -> Proposal {
    let r_prop = prior.sample(rng);
    Proposal {
        kind: ProposalKind::New,
        forward_log_density: prior.log_density(&r_prop),
        reverse_log_density: prior.log_density(r_cur),
        r_prop,
    }
}

/// Type 2: with probability 1/2 delete a uniformly chosen changepoint,
/// otherwise add one at a uniformly chosen empty slot.
pub fn propose_birth_death<R: Rng + ?Sized>(rng: &mut R, r_cur: &ChangepointVector) -> Proposal {
    let kind = ProposalKind::BirthDeath;
    let k = r_cur.count();
    let free = r_cur.slots() - k;
    let delete = rng.random_bool(0.5);
    let mut r_prop = r_cur.clone();
    if delete {
        if k == 0 {
            return Proposal::impossible(kind, r_cur);
        }
        let s = r_cur.nth_set(rng.random_range(0..k)).expect("rank below count");
        r_prop.clear(s);
        Proposal {
            kind,
            r_prop,
            forward_log_density: -((2 * k) as f64).ln(),
            reverse_log_density: -((2 * (free + 1)) as f64).ln(),
        }
    } else {
        if free == 0 {
            return Proposal::impossible(kind, r_cur);
        }
        let s = r_cur.nth_clear(rng.random_range(0..free)).expect("rank below free count");
        r_prop.set(s);
        Proposal {
            kind,
            r_prop,
            forward_log_density: -((2 * free) as f64).ln(),
            reverse_log_density: -((2 * (k + 1)) as f64).ln(),
        }
    }
}

/// Type 3: with probability 1/2 delete a uniformly chosen pair of
/// neighbouring changepoints; otherwise draw two distinct empty slots
/// uniformly and insert both if they fall inside the same segment.
///
/// Each insertable pair therefore has density `1 / (m (m - 1))` with
/// `m = n - 1 - |r|`, and the total insertion mass is
/// `(1/2) sum_j (d_j - 1)(d_j - 2) / (m (m - 1))`.
pub fn propose_segment_bd<R: Rng + ?Sized>(rng: &mut R, r_cur: &ChangepointVector) -> Proposal {
    let kind = ProposalKind::SegmentBirthDeath;
    let k = r_cur.count();
    let free = r_cur.slots() - k;
    let delete = rng.random_bool(0.5);
    let mut r_prop = r_cur.clone();
    if delete {
        if k < 2 {
            return Proposal::impossible(kind, r_cur);
        }
        let j = rng.random_range(0..k - 1);
        let a = r_cur.nth_set(j).expect("rank below count");
        let b = r_cur.nth_set(j + 1).expect("rank below count");
        r_prop.clear(a);
        r_prop.clear(b);
        let free_after = free + 2;
        Proposal {
            kind,
            r_prop,
            forward_log_density: -((2 * (k - 1)) as f64).ln(),
            reverse_log_density: -((free_after * (free_after - 1)) as f64).ln(),
        }
    } else {
        if free < 2 {
            return Proposal::impossible(kind, r_cur);
        }
        let first = rng.random_range(0..free);
        let mut second = rng.random_range(0..free - 1);
        if second >= first {
            second += 1;
        }
        let a = r_cur.nth_clear(first).expect("rank below free count");
        let b = r_cur.nth_clear(second).expect("rank below free count");
        let (lo, hi) = (a.min(b), a.max(b));
        if r_cur.count_between(lo, hi) > 0 {
            return Proposal::impossible(kind, r_cur);
        }
        r_prop.set(lo);
        r_prop.set(hi);
        Proposal {
            kind,
            r_prop,
            forward_log_density: -((free * (free - 1)) as f64).ln(),
            reverse_log_density: -((2 * (k + 1)) as f64).ln(),
        }
    }
}

/// Type 4: clear a uniformly chosen changepoint and set a uniformly chosen
/// empty slot. Symmetric.
pub fn propose_shift<R: Rng + ?Sized>(rng: &mut R, r_cur: &ChangepointVector) -> Proposal {
    let kind = ProposalKind::Shift;
    let k = r_cur.count();
    let free = r_cur.slots() - k;
    if k == 0 || free == 0 {
        return Proposal::impossible(kind, r_cur);
    }
    let s = r_cur.nth_set(rng.random_range(0..k)).expect("rank below count");
    let t = r_cur.nth_clear(rng.random_range(0..free)).expect("rank below free count");
    let mut r_prop = r_cur.clone();
    r_prop.clear(s);
    r_prop.set(t);
    let ld = -((k * free) as f64).ln();
    Proposal { kind, r_prop, forward_log_density: ld, reverse_log_density: ld }
}

pub fn propose<R: Rng + ?Sized>(
    kind: ProposalKind,
    rng: &mut R,
    prior: &BernoulliPrior,
    r_cur: &ChangepointVector,
) -> Proposal {
    match kind {
        ProposalKind::New => propose_new(rng, prior, r_cur),
        ProposalKind::BirthDeath => propose_birth_death(rng, r_cur),
        ProposalKind::SegmentBirthDeath => propose_segment_bd(rng, r_cur),
        ProposalKind::Shift => propose_shift(rng, r_cur),
    }
}

/// Closed-form `ln q(to | from)` of one kernel; minus infinity when `to` is
/// unreachable in one move.
pub fn kernel_log_density(
    kind: ProposalKind,
    prior: &BernoulliPrior,
    from: &ChangepointVector,
    to: &ChangepointVector,
) -> f64 {
    let k = from.count();
    let free = from.slots() - k;
    let diff = from.symmetric_difference(to);
    let added: Vec<usize> = diff.iter().copied().filter(|&i| to.contains(i)).collect();
    let removed = diff.len() - added.len();
    match kind {
        ProposalKind::New => prior.log_density(to),
        ProposalKind::BirthDeath => match (added.len(), removed) {
            (1, 0) => -((2 * free) as f64).ln(),
            (0, 1) => -((2 * k) as f64).ln(),
            _ => f64::NEG_INFINITY,
        },
        ProposalKind::SegmentBirthDeath => match (added.len(), removed) {
            (2, 0) if from.count_between(diff[0], diff[1]) == 0 => -((free * (free - 1)) as f64).ln(),
            (0, 2) if from.count_between(diff[0], diff[1]) == 0 => -((2 * (k - 1)) as f64).ln(),
            _ => f64::NEG_INFINITY,
        },
        ProposalKind::Shift => match (added.len(), removed) {
            (1, 1) => -((k * free) as f64).ln(),
            _ => f64::NEG_INFINITY,
        },
    }
}

/// Every outcome of one kernel from `from` with its probability. `None`
/// collects the mass of impossible draws, which leave the chain in place.
pub fn kernel_outcomes(
    kind: ProposalKind,
    prior: &BernoulliPrior,
    from: &ChangepointVector,
) -> Vec<(Option<ChangepointVector>, f64)> {
    let n = from.n();
    let set = from.indices();
    let clear: Vec<usize> = (1..n).filter(|&i| !from.contains(i)).collect();
    let (k, free) = (set.len(), clear.len());
    let with = |add: &[usize], remove: &[usize]| {
        let mut r = from.clone();
        add.iter().for_each(|&i| r.set(i));
        remove.iter().for_each(|&i| r.clear(i));
        Some(r)
    };
    let mut out = Vec::new();
    match kind {
        ProposalKind::New => {
            for r in ChangepointVector::all(n) {
                let p = prior.log_density(&r).exp();
                out.push((Some(r), p));
            }
        }
        ProposalKind::BirthDeath => {
            if k == 0 {
                out.push((None, 0.5));
            }
            for &s in &set {
                out.push((with(&[], &[s]), 0.5 / k as f64));
            }
            if free == 0 {
                out.push((None, 0.5));
            }
            for &s in &clear {
                out.push((with(&[s], &[]), 0.5 / free as f64));
            }
        }
        ProposalKind::SegmentBirthDeath => {
            if k < 2 {
                out.push((None, 0.5));
            }
            for pair in set.windows(2) {
                out.push((with(&[], pair), 0.5 / (k - 1) as f64));
            }
            if free < 2 {
                out.push((None, 0.5));
            } else {
                let per_pair = 1.0 / (free * (free - 1)) as f64;
                let mut mass = 0.0;
                for (x, &a) in clear.iter().enumerate() {
                    for &b in &clear[x + 1..] {
                        if from.count_between(a, b) == 0 {
                            out.push((with(&[a, b], &[]), per_pair));
                            mass += per_pair;
                        }
                    }
                }
                out.push((None, 0.5 - mass));
            }
        }
        ProposalKind::Shift => {
            if k == 0 || free == 0 {
                out.push((None, 1.0));
            }
            for &s in &set {
                for &t in &clear {
                    out.push((with(&[t], &[s]), 1.0 / (k * free) as f64));
                }
            }
        }
    }
    out
}

/// Mixture weights of the four kernels, stored as cutpoints on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalMix {
    cut: [f64; 3],
}

impl ProposalMix {
    pub fn from_config(cfg: &McmcConfig) -> Self {
        Self { cut: [cfg.u1, cfg.u2, cfg.u3] }
    }

    /// Normalizes non-negative weights for types 1..4. Zero weights switch
    /// a kernel off.
    pub fn from_weights(w: [f64; 4]) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if w.iter().any(|x| !(*x >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid proposal weights {w:?}")));
        }
        let c1 = w[0] / total;
        let c2 = c1 + w[1] / total;
        let c3 = c2 + w[2] / total;
        Ok(Self { cut: [c1, c2, c3] })
    }

    pub fn only(kind: ProposalKind) -> Self {
        let mut w = [0.0; 4];
        w[kind.number() as usize - 1] = 1.0;
        Self::from_weights(w).expect("single positive weight")
    }

    pub fn weight(&self, kind: ProposalKind) -> f64 {
        let [c1, c2, c3] = self.cut;
        match kind {
            ProposalKind::New => c1,
            ProposalKind::BirthDeath => c2 - c1,
            ProposalKind::SegmentBirthDeath => c3 - c2,
            ProposalKind::Shift => 1.0 - c3,
        }
    }

    /// Kernel selected by `u` in `[0, 1)`. Zero-weight kernels are never
    /// selected.
    pub fn select(&self, u: f64) -> ProposalKind {
        let [c1, c2, c3] = self.cut;
        if u < c1 {
            ProposalKind::New
        } else if u < c2 {
            ProposalKind::BirthDeath
        } else if u < c3 {
            ProposalKind::SegmentBirthDeath
        } else {
            ProposalKind::Shift
        }
    }
}

impl Default for ProposalMix {
    fn default() -> Self {
        Self::from_config(&McmcConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub r: ChangepointVector,
    pub score: f64,
}

/// Log acceptance probability for a proposal with finite forward density.
pub fn log_acceptance(score_cur: f64, score_prop: f64, proposal: &Proposal) -> f64 {
    if score_prop == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if score_cur == f64::NEG_INFINITY {
        return 0.0;
    }
    (score_prop - score_cur + proposal.reverse_log_density - proposal.forward_log_density).min(0.0)
}

/// One Metropolis–Hastings transition. Mutates `state` and returns the
/// record of the step.
pub fn mh_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    scorer: &mut Scorer<'_>,
    prior: &BernoulliPrior,
    mix: &ProposalMix,
    rng: &mut R,
    iter: usize,
) -> IterationRecord {
    let kind = mix.select(rng.random::<f64>());
    let proposal = propose(kind, rng, prior, &state.r);
    let mut accepted = false;
    let mut flipped = Vec::new();
    if proposal.is_possible() && scorer.admits(&proposal.r_prop) {
        let score_prop = scorer.total(&proposal.r_prop);
        let log_alpha = log_acceptance(state.score, score_prop, &proposal);
        let u: f64 = rng.random();
        if u < log_alpha.exp() {
            accepted = true;
            flipped = state.r.symmetric_difference(&proposal.r_prop);
            state.r = proposal.r_prop;
            state.score = score_prop;
        }
    }
    IterationRecord {
        iter,
        score: state.score,
        accepted,
        proposal: Some(kind),
        num_changepoints: state.r.count(),
        flipped,
    }
}

const INITIAL_REDRAWS: usize = 100;

/// A chain bound to one trajectory.
pub struct Sampler<'a> {
    scorer: Scorer<'a>,
    prior: BernoulliPrior,
    mix: ProposalMix,
    rng: StreamRng,
    t_max: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(traj: &'a Trajectory, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<Self> {
        cfg.validate()?;
        mcfg.validate()?;
        Ok(Self {
            scorer: Scorer::new(traj, cfg.clone()),
            prior: BernoulliPrior::new(traj.n(), mcfg.lambda, traj.dt()),
            mix: ProposalMix::from_config(mcfg),
            rng: seed::rng(mcfg.seed),
            t_max: mcfg.t_max,
        })
    }

    pub fn with_mix(mut self, mix: ProposalMix) -> Self {
        self.mix = mix;
        self
    }

    pub fn scorer(&self) -> &Scorer<'a> {
        &self.scorer
    }

    pub fn scorer_mut(&mut self) -> &mut Scorer<'a> {
        &mut self.scorer
    }

    /// Draws the initial state from the Bernoulli prior, redrawing states
    /// that cannot be scored and falling back to the empty vector.
    pub fn initial_state(&mut self) -> ChainState {
        for _ in 0..INITIAL_REDRAWS {
            let r = self.prior.sample(&mut self.rng);
            let s = self.scorer.total(&r);
            if s.is_finite() {
                return ChainState { r, score: s };
            }
        }
        let r = ChangepointVector::empty(self.prior.n());
        let score = self.scorer.total(&r);
        ChainState { r, score }
    }

    /// A state with an explicit starting vector.
    pub fn state_at(&mut self, r: ChangepointVector) -> ChainState {
        let score = self.scorer.total(&r);
        ChainState { r, score }
    }

    pub fn step(&mut self, state: &mut ChainState, iter: usize) -> IterationRecord {
        mh_step(state, &mut self.scorer, &self.prior, &self.mix, &mut self.rng, iter)
    }

    /// Runs `t_max` steps from `state` and records every one of them.
    pub fn run_from(&mut self, mut state: ChainState) -> ChainTrace {
        let initial = state.r.clone();
        let mut records = Vec::with_capacity(self.t_max + 1);
        records.push(IterationRecord {
            iter: 0,
            score: state.score,
            accepted: false,
            proposal: None,
            num_changepoints: state.r.count(),
            flipped: Vec::new(),
        });
        let mut best_r = state.r.clone();
        let mut best_score = state.score;
        let mut best_iter = 0;
        for iter in 1..=self.t_max {
            let rec = self.step(&mut state, iter);
            if rec.score > best_score {
                best_score = rec.score;
                best_r = state.r.clone();
                best_iter = iter;
            }
            records.push(rec);
        }
        ChainTrace { initial, records, best_r, best_score, best_iter }
    }

    pub fn run(&mut self) -> ChainTrace {
        let state = self.initial_state();
        self.run_from(state)
    }
}

/// Runs one chain from a prior draw.
pub fn run_chain(traj: &Trajectory, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<ChainTrace> {
    Ok(Sampler::new(traj, cfg, mcfg)?.run())
}

/// Result of a full search: the refitted argmax segmentation and the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub segmentation: Segmentation,
    pub changepoints: ChangepointVector,
    pub score: ScoreBreakdown,
    pub trace: ChainTrace,
}

/// Runs the chain and refits at the highest-scoring visited vector (first
/// occurrence on ties).
pub fn cplass(traj: &Trajectory, cfg: &ScoreConfig, mcfg: &McmcConfig) -> Result<Detection> {
    cplass_with_mix(traj, cfg, mcfg, ProposalMix::from_config(mcfg))
}

pub fn cplass_with_mix(traj: &Trajectory, cfg: &ScoreConfig, mcfg: &McmcConfig, mix: ProposalMix) -> Result<Detection> {
    let mut sampler = Sampler::new(traj, cfg, mcfg)?.with_mix(mix);
    let trace = sampler.run();
    let changepoints = trace.best_r.clone();
    let segmentation = fit_given_changepoints(traj, &changepoints)?;
    let score = sampler.scorer().breakdown(&changepoints);
    Ok(Detection { segmentation, changepoints, score, trace })
}
