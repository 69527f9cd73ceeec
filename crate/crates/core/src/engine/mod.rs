//! Episode execution, coupled replay and Monte Carlo aggregation.
//!
//! Work is partitioned by seed. Results are collected in seed order and every
//! aggregate is a sequential fold over that order, so the number of workers
//! never changes any output bit.

pub(crate) mod arena;
pub mod stats;
pub mod verify;

use std::io;
use std::path::Path;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use serde::Serialize;

use crate::algorithms::{Policy, PolicyConfig};
use crate::mechanism::{run_sp_pi, SpPiConfig};
use crate::model::{validate_effort, EpisodeOutcome, Instance, OwnHistory, Phase, PullRecord, RewardTape};
use crate::rng::{Stream, StreamId};
use crate::strategies::{ArmContext, Strategy, StrategySpec};

pub use arena::EpisodeError;
pub use stats::{MeanCi, RatioCi, Verdict};

/// Environment variable capping the number of concurrent episodes.
pub const WORKERS_ENV: &str = "STRAT_BANDIT_WORKERS";

/// Who chooses the arm each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Principal {
    Policy(PolicyConfig),
    SpPi(SpPiConfig),
}

impl Principal {
    pub fn ucb() -> Self {
        Principal::Policy(PolicyConfig::ucb())
    }

    pub fn eps_greedy(c: f64) -> Self {
        Principal::Policy(PolicyConfig::eps_greedy(c))
    }
}

/// Runs one episode with arbitrary strategy objects.
pub fn run_episode_with(
    instance: &Instance,
    principal: &Principal,
    strategies: &[&dyn Strategy],
    seed: u64,
) -> Result<EpisodeOutcome, EpisodeError> {
    match principal {
        Principal::SpPi(config) => run_sp_pi(instance, strategies, config, seed),
        Principal::Policy(config) => {
            let mut arena = arena::Arena::new(instance, strategies, seed)?;
            let mut policy = Policy::new(*config, instance.k(), instance.horizon(), seed);
            for round in 1..=instance.horizon() {
                let arm = policy.select().map_err(|source| EpisodeError::Policy { round, source })?;
                let delivered = arena.pull(arm, Phase::Bandit)?;
                policy.observe(arm, delivered);
            }
            Ok(arena.finish(vec![1]))
        }
    }
}

/// Checks that every strategy may be played by its arm.
pub fn validate_profile(instance: &Instance, profile: &[StrategySpec]) -> Result<(), EpisodeError> {
    if profile.len() != instance.k() {
        return Err(EpisodeError::ProfileSize { got: profile.len(), arms: instance.k() });
    }
    for (spec, s) in instance.arms().iter().zip(profile) {
        s.validate_for(spec).map_err(EpisodeError::Profile)?;
    }
    Ok(())
}

/// Runs one episode with library strategies.
pub fn run_episode(
    instance: &Instance,
    principal: &Principal,
    profile: &[StrategySpec],
    seed: u64,
) -> Result<EpisodeOutcome, EpisodeError> {
    validate_profile(instance, profile)?;
    let refs: Vec<&dyn Strategy> = profile.iter().map(|s| s as &dyn Strategy).collect();
    run_episode_with(instance, principal, &refs, seed)
}

/// Two episodes on the same seed differing only in one arm's strategy.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub deviating_arm: usize,
    pub base: EpisodeOutcome,
    pub alt: EpisodeOutcome,
}

impl CoupledPair {
    fn without(outcome: &EpisodeOutcome, arm: usize) -> Vec<usize> {
        outcome.round_log.iter().map(|e| e.arm).filter(|&a| a != arm).collect()
    }

    /// The deviation's pull sequence with the deviating arm removed is a
    /// subsequence of the baseline's.
    pub fn subsequence_holds(&self) -> bool {
        let alt = Self::without(&self.alt, self.deviating_arm);
        let base = Self::without(&self.base, self.deviating_arm);
        is_subsequence(&alt, &base)
    }

    /// No other arm gains pulls under the deviation.
    pub fn others_not_increased(&self) -> bool {
        (0..self.base.pulls.len()).filter(|&j| j != self.deviating_arm).all(|j| self.alt.pulls[j] <= self.base.pulls[j])
    }
}

pub fn is_subsequence(needle: &[usize], haystack: &[usize]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|x| it.any(|y| y == x))
}

pub fn coupled_replay(
    instance: &Instance,
    principal: &Principal,
    profile: &[StrategySpec],
    deviating_arm: usize,
    alt_strategy: &StrategySpec,
    seed: u64,
) -> Result<CoupledPair, EpisodeError> {
    let mut alt_profile = profile.to_vec();
    alt_profile[deviating_arm] = alt_strategy.clone();
    Ok(CoupledPair {
        deviating_arm,
        base: run_episode(instance, principal, profile, seed)?,
        alt: run_episode(instance, principal, &alt_profile, seed)?,
    })
}

/// A sized pool of workers for seed-parallel work.
pub struct Engine {
    pool: ThreadPool,
    workers: usize,
}

impl Engine {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
        Self { pool, workers }
    }

    /// Sized from [`WORKERS_ENV`], defaulting to the available parallelism.
    pub fn from_env() -> Self {
        let workers = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&w| w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Self::new(workers)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Applies `f` to every seed; results come back in seed-list order.
    pub fn map_seeds<T, F>(&self, seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
    }

    /// Runs one episode per seed and keeps the outcomes without round logs.
    pub fn outcomes(
        &self,
        instance: &Instance,
        principal: &Principal,
        profile: &[StrategySpec],
        seeds: &[u64],
    ) -> Result<Vec<EpisodeOutcome>, EpisodeError> {
        validate_profile(instance, profile)?;
        self.map_seeds(seeds, |seed| {
            run_episode(instance, principal, profile, seed).map(|mut o| {
                o.round_log = Vec::new();
                o
            })
        })
        .into_iter()
        .collect()
    }

    pub fn monte_carlo(
        &self,
        instance: &Instance,
        principal: &Principal,
        profile: &[StrategySpec],
        seeds: &[u64],
    ) -> Result<MonteCarloSummary, EpisodeError> {
        let outcomes = self.outcomes(instance, principal, profile, seeds)?;
        Ok(MonteCarloSummary::from_outcomes(instance.horizon(), &outcomes))
    }
}

/// Seeds `base, base + 1, ..., base + count - 1`.
pub fn seed_range(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub pulls: MeanCi,
    pub effort: MeanCi,
    pub utility: MeanCi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub horizon: u64,
    pub count: usize,
    pub arms: Vec<ArmSummary>,
    pub revenue: MeanCi,
    /// `revenue / horizon`.
    pub revenue_rate: MeanCi,
    /// Fraction of episodes in which each arm was blocked.
    pub blocked_rate: Vec<f64>,
}

impl MonteCarloSummary {
    pub fn from_outcomes(horizon: u64, outcomes: &[EpisodeOutcome]) -> Self {
        let k = outcomes.first().map_or(0, |o| o.pulls.len());
        let column = |f: &dyn Fn(&EpisodeOutcome) -> f64| -> MeanCi {
            MeanCi::from_samples(&outcomes.iter().map(f).collect::<Vec<_>>())
        };
        let arms = (0..k)
            .map(|i| ArmSummary {
                pulls: column(&|o| o.pulls[i] as f64),
                effort: column(&|o| o.effort[i]),
                utility: column(&|o| o.utility[i]),
            })
            .collect();
        let revenue = column(&|o| o.revenue);
        let count = outcomes.len();
        let blocked_rate = (0..k)
            .map(|i| outcomes.iter().filter(|o| o.blocked_arms.contains(&i)).count() as f64 / count as f64)
            .collect();
        Self { horizon, count, arms, revenue, revenue_rate: revenue.scaled(1.0 / horizon as f64), blocked_rate }
    }
}

/// Delivered-reward moments of a strategy played on every pull of one arm's
/// tape, without any principal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyMoments {
    pub pulls: u64,
    pub delivered_mean: f64,
    pub effort_min: f64,
    pub effort_mean: f64,
    pub violations: u64,
}

pub fn strategy_moments(
    instance: &Instance,
    arm: usize,
    strategy: &dyn Strategy,
    pulls: u64,
    seed: u64,
) -> Result<StrategyMoments, EpisodeError> {
    let spec = instance.arm(arm);
    let ctx = ArmContext { spec, horizon: instance.horizon() };
    let mut tape = RewardTape::new(spec, seed).cursor();
    let mut rng = Stream::new(seed, StreamId::Strategy(arm));
    let mut history = OwnHistory::default();
    let (mut delivered_sum, mut effort_sum, mut effort_min, mut violations) = (0.0, 0.0, f64::INFINITY, 0);
    for round in 1..=pulls {
        let pull_index = tape.next_index();
        let raw = tape.next_raw();
        let effort = strategy
            .effort(&ctx, &history, raw, &mut rng)
            .map_err(|source| EpisodeError::Strategy { round, source })?;
        let delivered = match validate_effort(spec, raw, effort) {
            Ok(d) => d,
            Err(_) => {
                violations += 1;
                continue;
            }
        };
        delivered_sum += delivered;
        effort_sum += effort;
        effort_min = effort_min.min(effort);
        history.push(PullRecord { pull_index, raw, effort, delivered });
    }
    let ok = (pulls - violations).max(1) as f64;
    Ok(StrategyMoments {
        pulls,
        delivered_mean: delivered_sum / ok,
        effort_min,
        effort_mean: effort_sum / ok,
        violations,
    })
}

/// Writes the round log as CSV with columns
/// `round, arm, raw, effort, delivered, blocked, phase`.
pub fn write_round_log(path: &Path, outcome: &EpisodeOutcome) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in &outcome.round_log {
        w.serialize(e)?;
    }
    w.flush()
}
