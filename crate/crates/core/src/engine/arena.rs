//! Per-episode state shared by plain policies and the mechanism: reward tapes,
//! the arms' own histories, their private streams and the round log.

use thiserror::Error;

use crate::algorithms::PolicyError;
use crate::model::OwnHistory;
use crate::model::{
    validate_effort, Announcement, ConstraintViolation, EpisodeOutcome, Instance, Phase, PullRecord, RewardTape,
    RoundEntry, TapeCursor,
};
use crate::rng::{Stream, StreamId};
use crate::strategies::{ArmContext, Strategy, StrategyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error("round {round}: {violation}")]
    Constraint { round: u64, violation: ConstraintViolation },
    #[error("round {round}: {source}")]
    Strategy { round: u64, source: StrategyError },
    #[error("round {round}: {source}")]
    Policy { round: u64, source: PolicyError },
    #[error("configuration rejected: {0}")]
    ConfigRejected(String),
    #[error("{0}")]
    Profile(StrategyError),
    #[error("profile has {got} strategies for {arms} arms")]
    ProfileSize { got: usize, arms: usize },
}

pub(crate) struct Arena<'a> {
    instance: &'a Instance,
    strategies: &'a [&'a dyn Strategy],
    seed: u64,
    cursors: Vec<TapeCursor>,
    histories: Vec<OwnHistory>,
    streams: Vec<Stream>,
    pulls: Vec<u64>,
    effort: Vec<f64>,
    cost: Vec<f64>,
    revenue: f64,
    log: Vec<RoundEntry>,
}

impl<'a> Arena<'a> {
    pub fn new(instance: &'a Instance, strategies: &'a [&'a dyn Strategy], seed: u64) -> Result<Self, EpisodeError> {
        let k = instance.k();
        if strategies.len() != k {
            return Err(EpisodeError::ProfileSize { got: strategies.len(), arms: k });
        }
        Ok(Self {
            instance,
            strategies,
            seed,
            cursors: instance.arms().iter().map(|a| RewardTape::new(a, seed).cursor()).collect(),
            histories: vec![OwnHistory::default(); k],
            streams: (0..k).map(|i| Stream::new(seed, StreamId::Strategy(i))).collect(),
            pulls: vec![0; k],
            effort: vec![0.0; k],
            cost: vec![0.0; k],
            revenue: 0.0,
            log: Vec::with_capacity(instance.horizon() as usize),
        })
    }

    pub fn round(&self) -> u64 {
        self.log.len() as u64
    }

    /// Pulls `arm` in the next round and returns the delivered reward.
    pub fn pull(&mut self, arm: usize, phase: Phase) -> Result<f64, EpisodeError> {
        let round = self.round() + 1;
        let spec = self.instance.arm(arm);
        let pull_index = self.cursors[arm].next_index();
        let raw = self.cursors[arm].next_raw();
        let ctx = ArmContext { spec, horizon: self.instance.horizon() };
        let effort = self.strategies[arm]
            .effort(&ctx, &self.histories[arm], raw, &mut self.streams[arm])
            .map_err(|source| EpisodeError::Strategy { round, source })?;
        let delivered =
            validate_effort(spec, raw, effort).map_err(|violation| EpisodeError::Constraint { round, violation })?;
        // keep delivered == raw + effort exactly after snapping onto a bound
        let effort = delivered - raw;
        self.histories[arm].push(PullRecord { pull_index, raw, effort, delivered });
        self.pulls[arm] += 1;
        self.effort[arm] += effort;
        self.cost[arm] += spec.cost(effort);
        self.revenue += delivered;
        self.log.push(RoundEntry { round, arm, raw, effort, delivered, blocked: false, phase });
        Ok(delivered)
    }

    /// Flags the most recent round as the one that triggered a block.
    pub fn mark_last_blocked(&mut self) {
        if let Some(e) = self.log.last_mut() {
            e.blocked = true;
        }
    }

    pub fn announce(&mut self, a: Announcement) {
        for h in &mut self.histories {
            h.announce(a);
        }
    }

    pub fn finish(self, phase_marks: Vec<u64>) -> EpisodeOutcome {
        let utility = self.pulls.iter().zip(&self.cost).map(|(&t, &c)| t as f64 - c).collect();
        EpisodeOutcome {
            horizon: self.instance.horizon(),
            seed: self.seed,
            pulls: self.pulls,
            effort: self.effort,
            cost: self.cost,
            utility,
            revenue: self.revenue,
            phase_marks,
            bids: None,
            second_highest: None,
            blocked_arms: Vec::new(),
            blocked_arms_paid: false,
            round_log: self.log,
        }
    }
}
