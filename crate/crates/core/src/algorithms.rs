//! Principal-side bandit policies.
//!
//! Both policies play every unblocked arm once (in id order) before using
//! their selection rule, track empirical means of *delivered* rewards, and
//! exclude blocked arms from every later selection. Randomness is consumed
//! per round: ε-greedy draws its exploration coin, its exploration arm and a
//! tie draw on every post-initialization round whether or not they are used,
//! so two runs sharing a seed see the same draws at the same round.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{pick_index, Stream, StreamId};

/// Default constant of the ε-greedy schedule.
pub const DEFAULT_EPS_C: f64 = 32.0;

/// Means closer than this are treated as tied by ε-greedy exploitation.
pub const MEAN_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("every arm is blocked")]
    AllArmsBlocked,
}

/// UCB index `mean_hat + sqrt(2 ln(horizon) / pulls)`.
pub fn ucb_index(mean_hat: f64, pulls: u64, horizon: u64) -> f64 {
    debug_assert!(pulls >= 1 && horizon >= 2);
    mean_hat + (2.0 * (horizon as f64).ln() / pulls as f64).sqrt()
}

/// Exploration rate `min(1, c (k ln n)^{1/3} n^{-1/3})`.
pub fn eps_schedule(horizon: u64, k: usize, c: f64) -> f64 {
    let n = horizon as f64;
    (c * (k as f64 * n.ln()).cbrt() / n.cbrt()).min(1.0)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Per-arm statistics the principal keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pulls: Vec<u64>,
    sums: Vec<CompensatedSum>,
    blocked: Vec<bool>,
    horizon: u64,
    round: u64,
    two_ln_n: f64,
}

impl PolicyState {
    pub fn new(k: usize, horizon: u64) -> Self {
        Self {
            pulls: vec![0; k],
            sums: vec![CompensatedSum::default(); k],
            blocked: vec![false; k],
            horizon,
            round: 0,
            two_ln_n: 2.0 * (horizon as f64).ln(),
        }
    }

    pub fn k(&self) -> usize {
        self.pulls.len()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Number of `select` calls so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn total(&self, arm: usize) -> f64 {
        self.sums[arm].value()
    }

    /// Empirical mean of delivered rewards, 0 for an unpulled arm.
    pub fn mean(&self, arm: usize) -> f64 {
        match self.pulls[arm] {
            0 => 0.0,
            t => self.sums[arm].value() / t as f64,
        }
    }

    pub fn is_blocked(&self, arm: usize) -> bool {
        self.blocked[arm]
    }

    pub fn blocked(&self) -> Vec<usize> {
        (0..self.k()).filter(|&a| self.blocked[a]).collect()
    }

    pub fn block(&mut self, arm: usize) {
        self.blocked[arm] = true;
    }

    pub fn observe(&mut self, arm: usize, delivered: f64) {
        self.pulls[arm] += 1;
        self.sums[arm].add(delivered);
    }

    /// Overrides an arm's statistics; used to set up hand-built states.
    pub fn set_stats(&mut self, arm: usize, pulls: u64, mean: f64) {
        self.pulls[arm] = pulls;
        self.sums[arm] = CompensatedSum { sum: mean * pulls as f64, carry: 0.0 };
    }

    fn unblocked(&self) -> Vec<usize> {
        (0..self.k()).filter(|&a| !self.blocked[a]).collect()
    }

    /// Lowest-id unblocked arm that has not been pulled yet.
    fn initial_arm(&self) -> Option<usize> {
        (0..self.k()).find(|&a| !self.blocked[a] && self.pulls[a] == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestId,
    Uniform,
}

/// Which policy to run and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum PolicyConfig {
    Ucb {
        #[serde(default)]
        ties: TieBreak,
    },
    EpsGreedy {
        #[serde(default = "default_c")]
        c: f64,
    },
}

fn default_c() -> f64 {
    DEFAULT_EPS_C
}

impl PolicyConfig {
    pub fn ucb() -> Self {
        PolicyConfig::Ucb { ties: TieBreak::LowestId }
    }

    pub fn eps_greedy(c: f64) -> Self {
        PolicyConfig::EpsGreedy { c }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::Ucb { .. } => "ucb",
            PolicyConfig::EpsGreedy { .. } => "eps-greedy",
        }
    }
}

/// Draws consumed by one post-initialization round.
#[derive(Debug, Clone, Copy)]
struct RoundDraws {
    coin: f64,
    explore: f64,
    tie: f64,
}

/// A running policy: configuration, state and its random streams.
#[derive(Debug, Clone)]
pub struct Policy {
    config: PolicyConfig,
    state: PolicyState,
    epsilon: f64,
    explore: Stream,
    tie: Stream,
}

impl Policy {
    pub fn new(config: PolicyConfig, k: usize, horizon: u64, seed: u64) -> Self {
        let epsilon = match config {
            PolicyConfig::EpsGreedy { c } => eps_schedule(horizon, k, c),
            PolicyConfig::Ucb { .. } => 0.0,
        };
        Self {
            config,
            state: PolicyState::new(k, horizon),
            epsilon,
            explore: Stream::new(seed, StreamId::Explore),
            tie: Stream::new(seed, StreamId::Tie),
        }
    }

    pub fn config(&self) -> PolicyConfig {
        self.config
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut PolicyState {
        &mut self.state
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn select(&mut self) -> Result<usize, PolicyError> {
        self.state.round += 1;
        if let Some(arm) = self.state.initial_arm() {
            return Ok(arm);
        }
        let draws =
            RoundDraws { coin: self.explore.uniform(), explore: self.explore.uniform(), tie: self.tie.uniform() };
        match self.config {
            PolicyConfig::Ucb { ties } => ucb_select(&self.state, ties, draws.tie),
            PolicyConfig::EpsGreedy { .. } => eps_greedy_select(&self.state, self.epsilon, draws),
        }
    }

    pub fn observe(&mut self, arm: usize, delivered: f64) {
        self.state.observe(arm, delivered);
    }

    pub fn block(&mut self, arm: usize) {
        self.state.block(arm);
    }
}

/// UCB selection on a fully initialized state. Ties are exact equalities.
fn ucb_select(state: &PolicyState, ties: TieBreak, tie_draw: f64) -> Result<usize, PolicyError> {
    let two_ln_n = state.two_ln_n;
    let mut best = f64::NEG_INFINITY;
    let mut winners: Vec<usize> = Vec::new();
    for arm in (0..state.k()).filter(|&a| !state.blocked[a]) {
        // same expression as `ucb_index`, with the logarithm hoisted
        let idx = state.mean(arm) + (two_ln_n / state.pulls[arm] as f64).sqrt();
        if idx > best {
            best = idx;
            winners.clear();
            winners.push(arm);
        } else if idx == best {
            winners.push(arm);
        }
    }
    match (winners.is_empty(), ties) {
        (true, _) => Err(PolicyError::AllArmsBlocked),
        (false, TieBreak::LowestId) => Ok(winners[0]),
        (false, TieBreak::Uniform) => Ok(winners[pick_index(tie_draw, winners.len())]),
    }
}

fn eps_greedy_select(state: &PolicyState, epsilon: f64, draws: RoundDraws) -> Result<usize, PolicyError> {
    let open = state.unblocked();
    if open.is_empty() {
        return Err(PolicyError::AllArmsBlocked);
    }
    if draws.coin < epsilon {
        return Ok(open[pick_index(draws.explore, open.len())]);
    }
    let best = open.iter().map(|&a| state.mean(a)).fold(f64::NEG_INFINITY, f64::max);
    let leaders: Vec<usize> = open.into_iter().filter(|&a| state.mean(a) >= best - MEAN_TIE_TOLERANCE).collect();
    Ok(leaders[pick_index(draws.tie, leaders.len())])
}

/// Stand-alone UCB selection used for hand-built states: initialization
/// order first, then the highest index. `tie_draw` switches to uniform ties.
pub fn select_ucb(state: &PolicyState, tie_draw: Option<f64>) -> Result<usize, PolicyError> {
    if state.unblocked().is_empty() {
        return Err(PolicyError::AllArmsBlocked);
    }
    if let Some(arm) = state.initial_arm() {
        return Ok(arm);
    }
    match tie_draw {
        None => ucb_select(state, TieBreak::LowestId, 0.0),
        Some(u) => ucb_select(state, TieBreak::Uniform, u),
    }
}
