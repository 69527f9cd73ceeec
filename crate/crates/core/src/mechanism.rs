//! Second-price bidding followed by a blocking-augmented performance
//! incentivizing phase and a poly-logarithmic reward phase paid in rounds.
//!
//! Round layout for horizon `n`, `k` arms and `R = k * ceil(ceil(ln n)^(rho+3))`:
//! rounds `1..=k` collect bids, the PI phase runs until `n - R`, each arm then
//! receives `N_i'` reward rounds in id order, and the unused part of `R` is
//! returned to the PI phase so the episode always lasts exactly `n` rounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{Policy, PolicyConfig};
use crate::engine::arena::{Arena, EpisodeError};
use crate::model::{Announcement, EpisodeOutcome, Instance, Phase, EPS};
use crate::rng::{Stream, StreamId};
use crate::strategies::Strategy;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuctionError {
    #[error("need at least two bids, got {0}")]
    TooFewBids(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpPiConfig {
    pub rho: f64,
    pub inner_policy: PolicyConfig,
    /// Disabling blocking reproduces the unprotected variant.
    pub blocking: bool,
}

impl Default for SpPiConfig {
    fn default() -> Self {
        Self { rho: 1.0, inner_policy: PolicyConfig::ucb(), blocking: true }
    }
}

impl SpPiConfig {
    /// `k * ceil(ceil(ln n)^(rho + 3))`.
    pub fn reward_budget(&self, horizon: u64, k: usize) -> u64 {
        let l = (horizon as f64).ln().ceil();
        k as u64 * l.powf(self.rho + 3.0).ceil() as u64
    }

    pub fn validate(&self, horizon: u64, k: usize) -> Result<(), EpisodeError> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(EpisodeError::ConfigRejected(format!("rho must be positive, got {}", self.rho)));
        }
        let budget = self.reward_budget(horizon, k);
        if horizon <= budget + 2 * k as u64 {
            return Err(EpisodeError::ConfigRejected(format!(
                "horizon {horizon} leaves no PI phase after {k} bids and a reward budget of {budget}"
            )));
        }
        Ok(())
    }
}

/// Auction bookkeeping for one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuctionState {
    pub bids: Vec<f64>,
    pub m_prime: f64,
    pub blocked: Vec<bool>,
    pub phase: Phase,
    pub pi_means: Vec<f64>,
}

/// Second element of the bids sorted in descending order, duplicates kept.
pub fn second_highest(bids: &[f64]) -> Result<f64, AuctionError> {
    if bids.len() < 2 {
        return Err(AuctionError::TooFewBids(bids.len()));
    }
    let mut sorted = bids.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[1])
}

/// Block iff the bid did not exceed `m'` and the delivery strictly did.
pub fn blocking_check(bid: f64, m_prime: f64, delivered: f64) -> bool {
    bid <= m_prime + EPS && delivered > m_prime + EPS
}

/// `floor(x) + Bernoulli(frac(x))` with `x = mean_pi * ln_n^(rho+3)`.
/// Consumes exactly one draw.
pub fn reward_phase_rounds_ln(mean_pi: f64, ln_n: f64, rho: f64, rng: &mut Stream) -> u64 {
    let x = mean_pi * ln_n.powf(rho + 3.0);
    let base = x.floor();
    let extra = rng.bernoulli(x - base);
    base as u64 + extra as u64
}

pub fn reward_phase_rounds(mean_pi: f64, horizon: u64, rho: f64, rng: &mut Stream) -> u64 {
    reward_phase_rounds_ln(mean_pi, (horizon as f64).ln(), rho, rng)
}

pub fn run_sp_pi(
    instance: &Instance,
    strategies: &[&dyn Strategy],
    config: &SpPiConfig,
    seed: u64,
) -> Result<EpisodeOutcome, EpisodeError> {
    let n = instance.horizon();
    let k = instance.k();
    config.validate(n, k)?;
    let budget = config.reward_budget(n, k);
    let mut arena = Arena::new(instance, strategies, seed)?;
    let policy_err = |round| move |source| EpisodeError::Policy { round, source };

    arena.announce(Announcement::PhaseStart(Phase::Bidding));
    let mut bids = Vec::with_capacity(k);
    for arm in 0..k {
        bids.push(arena.pull(arm, Phase::Bidding)?);
    }
    let m_prime = second_highest(&bids).expect("instances have at least two arms");
    let mut state =
        AuctionState { bids, m_prime, blocked: vec![false; k], phase: Phase::PiMab, pi_means: vec![0.0; k] };
    arena.announce(Announcement::SecondHighest(m_prime));
    arena.announce(Announcement::PhaseStart(Phase::PiMab));
    let pi_start = arena.round() + 1;

    let mut policy = Policy::new(config.inner_policy, k, n, seed);
    let run_pi = |arena: &mut Arena, policy: &mut Policy, state: &mut AuctionState, until: u64| {
        while arena.round() < until {
            let arm = policy.select().map_err(policy_err(arena.round() + 1))?;
            let delivered = arena.pull(arm, Phase::PiMab)?;
            policy.observe(arm, delivered);
            if config.blocking && blocking_check(state.bids[arm], state.m_prime, delivered) {
                policy.block(arm);
                state.blocked[arm] = true;
                arena.mark_last_blocked();
            }
        }
        Ok::<(), EpisodeError>(())
    };
    run_pi(&mut arena, &mut policy, &mut state, n - budget)?;

    state.pi_means = (0..k).map(|a| policy.state().mean(a)).collect();
    let mut rng = Stream::new(seed, StreamId::Mechanism);
    let payments: Vec<u64> = state.pi_means.iter().map(|&m| reward_phase_rounds(m, n, config.rho, &mut rng)).collect();
    let paid: u64 = payments.iter().sum();
    debug_assert!(paid <= budget);
    run_pi(&mut arena, &mut policy, &mut state, n - paid)?;

    state.phase = Phase::RewardPhase;
    arena.announce(Announcement::PhaseStart(Phase::RewardPhase));
    let reward_start = arena.round() + 1;
    for (arm, &rounds) in payments.iter().enumerate() {
        for _ in 0..rounds {
            arena.pull(arm, Phase::RewardPhase)?;
        }
    }
    debug_assert_eq!(arena.round(), n);

    let mut outcome = arena.finish(vec![1, pi_start, reward_start]);
    outcome.bids = Some(state.bids);
    outcome.second_highest = Some(state.m_prime);
    outcome.blocked_arms = (0..k).filter(|&a| state.blocked[a]).collect();
    outcome.blocked_arms_paid = true;
    Ok(outcome)
}
