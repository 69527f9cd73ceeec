//! Domain model: arms, instances, reward tapes, effort validation and the
//! blind-observation history handed to strategies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{Stream, StreamId};

/// Absolute tolerance used for every floating-point boundary comparison.
pub const EPS: f64 = 1e-12;

/// Upper bound on the number of atoms in a finite distribution.
pub const MAX_ATOMS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("an instance needs at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("no honest arm: at least one arm must be honest")]
    NoHonestArm,
    #[error("arm {arm}: mean {mean} exceeds cap {cap}")]
    MeanCapOrder { arm: usize, mean: f64, cap: f64 },
    #[error("arm {arm}: distribution support exceeds cap {cap} (atom {value})")]
    SupportExceedsCap { arm: usize, cap: f64, value: f64 },
    #[error("arm {arm}: {reason}")]
    InvalidArm { arm: usize, reason: String },
    #[error("horizon {horizon} is shorter than the number of arms {arms}")]
    HorizonTooShort { horizon: u64, arms: usize },
}

/// Raw reward distribution of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", from = "DistributionDoc")]
pub enum DistributionSpec {
    /// Value `cap` with probability `mean / cap`, otherwise 0.
    #[default]
    ScaledBernoulli,
    /// Finite list of `(value, probability)` atoms.
    DiscreteFinite { atoms: Vec<(f64, f64)> },
}

/// Parsing form of [`DistributionSpec`] that rejects stray keys on every kind.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DistributionDoc {
    ScaledBernoulli {},
    DiscreteFinite { atoms: Vec<(f64, f64)> },
}

impl From<DistributionDoc> for DistributionSpec {
    fn from(d: DistributionDoc) -> Self {
        match d {
            DistributionDoc::ScaledBernoulli {} => DistributionSpec::ScaledBernoulli,
            DistributionDoc::DiscreteFinite { atoms } => DistributionSpec::DiscreteFinite { atoms },
        }
    }
}

impl DistributionSpec {
    /// Degenerate distribution at `value`.
    pub fn point(value: f64) -> Self {
        DistributionSpec::DiscreteFinite { atoms: vec![(value, 1.0)] }
    }

    /// Atoms of the distribution for an arm with the given mean and cap.
    pub fn atoms(&self, mean: f64, cap: f64) -> Vec<(f64, f64)> {
        match self {
            DistributionSpec::ScaledBernoulli => {
                if cap <= 0.0 {
                    vec![(0.0, 1.0)]
                } else {
                    let p = mean / cap;
                    vec![(0.0, 1.0 - p), (cap, p)]
                }
            }
            DistributionSpec::DiscreteFinite { atoms } => atoms.clone(),
        }
    }

    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    fn sample(&self, mean: f64, cap: f64, u: f64) -> f64 {
        match self {
            DistributionSpec::ScaledBernoulli => {
                if cap > 0.0 && u < mean / cap {
                    cap
                } else {
                    0.0
                }
            }
            DistributionSpec::DiscreteFinite { atoms } => {
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                // probabilities sum to 1 within EPS; fall back to the last atom
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }
}

/// Static parameters of one strategic arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub id: usize,
    pub mean: f64,
    pub cap: f64,
    pub honest: bool,
    pub distribution: DistributionSpec,
    pub cost_coefficient: f64,
}

impl ArmSpec {
    pub fn new(
        id: usize,
        mean: f64,
        cap: f64,
        honest: bool,
        distribution: DistributionSpec,
    ) -> Result<Self, ModelError> {
        let spec = Self { id, mean, cap, honest, distribution, cost_coefficient: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Scaled-Bernoulli arm with unit cost.
    pub fn bernoulli(id: usize, mean: f64, cap: f64, honest: bool) -> Result<Self, ModelError> {
        Self::new(id, mean, cap, honest, DistributionSpec::ScaledBernoulli)
    }

    pub fn with_cost(mut self, coefficient: f64) -> Result<Self, ModelError> {
        self.cost_coefficient = coefficient;
        self.validate()?;
        Ok(self)
    }

    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.distribution.atoms(self.mean, self.cap)
    }

    /// Linear cost `a * effort`.
    pub fn cost(&self, effort: f64) -> f64 {
        self.cost_coefficient * effort
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let arm = self.id;
        let invalid = |reason: String| ModelError::InvalidArm { arm, reason };
        if !(self.mean.is_finite() && self.cap.is_finite()) {
            return Err(invalid("mean and cap must be finite".into()));
        }
        if self.mean < 0.0 {
            return Err(invalid(format!("mean {} is negative", self.mean)));
        }
        if self.cap > 1.0 {
            return Err(invalid(format!("cap {} exceeds 1", self.cap)));
        }
        if self.mean > self.cap + EPS {
            return Err(ModelError::MeanCapOrder { arm, mean: self.mean, cap: self.cap });
        }
        if !(self.cost_coefficient > 0.0 && self.cost_coefficient.is_finite()) {
            return Err(invalid(format!("cost_coefficient {} must be positive", self.cost_coefficient)));
        }
        if let DistributionSpec::DiscreteFinite { atoms } = &self.distribution {
            if atoms.is_empty() || atoms.len() > MAX_ATOMS {
                return Err(invalid(format!("atom count {} outside [1, {MAX_ATOMS}]", atoms.len())));
            }
            for &(v, p) in atoms {
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(format!("atom value {v} outside [0, 1]")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("atom probability {p} outside [0, 1]")));
                }
                if v > self.cap + EPS {
                    return Err(ModelError::SupportExceedsCap { arm, cap: self.cap, value: v });
                }
            }
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            if (total - 1.0).abs() > EPS {
                return Err(invalid(format!("atom probabilities sum to {total}, not 1")));
            }
            let expectation: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
            if (expectation - self.mean).abs() > 1e-9 {
                return Err(invalid(format!("distribution expectation {expectation} differs from mean {}", self.mean)));
            }
        }
        Ok(())
    }
}

/// One arm as it appears in a JSON instance document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub mean: f64,
    pub cap: f64,
    pub honest: bool,
    #[serde(default)]
    pub distribution: DistributionSpec,
    #[serde(default = "unit_cost")]
    pub cost_coefficient: f64,
}

fn unit_cost() -> f64 {
    1.0
}

impl ArmConfig {
    pub fn bernoulli(mean: f64, cap: f64, honest: bool) -> Self {
        Self { mean, cap, honest, distribution: DistributionSpec::ScaledBernoulli, cost_coefficient: 1.0 }
    }
}

/// Instance document: `{ "horizon", "arms", "seed" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub horizon: u64,
    pub arms: Vec<ArmConfig>,
    #[serde(default)]
    pub seed: u64,
}

/// A validated bandit instance. Derived quantities are computed on demand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    arms: Vec<ArmSpec>,
    horizon: u64,
}

impl Instance {
    pub fn new(arms: Vec<ArmSpec>, horizon: u64) -> Result<Self, ModelError> {
        if arms.len() < 2 {
            return Err(ModelError::TooFewArms(arms.len()));
        }
        for (i, a) in arms.iter().enumerate() {
            if a.id != i {
                return Err(ModelError::InvalidArm { arm: i, reason: format!("id {} out of order", a.id) });
            }
            a.validate()?;
        }
        if !arms.iter().any(|a| a.honest) {
            return Err(ModelError::NoHonestArm);
        }
        if horizon < arms.len() as u64 {
            return Err(ModelError::HorizonTooShort { horizon, arms: arms.len() });
        }
        Ok(Self { arms, horizon })
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn arm(&self, i: usize) -> &ArmSpec {
        &self.arms[i]
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: u64) -> Result<Self, ModelError> {
        Self::new(self.arms.clone(), horizon)
    }

    /// Highest cap over all arms.
    pub fn maxall(&self) -> f64 {
        self.arms.iter().map(|a| a.cap).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Arms whose cap equals the highest cap.
    pub fn top_set(&self) -> Vec<usize> {
        let m = self.maxall();
        self.arms.iter().filter(|a| (a.cap - m).abs() <= EPS).map(|a| a.id).collect()
    }

    pub fn k_top(&self) -> usize {
        self.top_set().len()
    }

    /// Honest arm with the highest mean (lowest id on ties).
    pub fn honest_best(&self) -> usize {
        let mut best: Option<&ArmSpec> = None;
        for a in self.arms.iter().filter(|a| a.honest) {
            if best.is_none_or(|b| a.mean > b.mean) {
                best = Some(a);
            }
        }
        best.expect("instance has an honest arm").id
    }

    pub fn honest_mean(&self) -> f64 {
        self.arms[self.honest_best()].mean
    }

    /// Second highest cap, duplicates retained.
    pub fn second_cap(&self) -> f64 {
        let mut caps: Vec<f64> = self.arms.iter().map(|a| a.cap).collect();
        caps.sort_by(|a, b| b.total_cmp(a));
        caps[1]
    }

    pub fn best_mean(&self) -> f64 {
        self.arms.iter().map(|a| a.mean).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Validates an instance document.
pub fn build_instance(config: &InstanceConfig) -> Result<Instance, ModelError> {
    let arms = config
        .arms
        .iter()
        .enumerate()
        .map(|(id, a)| ArmSpec {
            id,
            mean: a.mean,
            cap: a.cap,
            honest: a.honest,
            distribution: a.distribution.clone(),
            cost_coefficient: a.cost_coefficient,
        })
        .collect();
    Instance::new(arms, config.horizon)
}

/// Pull-indexed raw reward stream of one arm.
#[derive(Debug, Clone)]
pub struct RewardTape {
    arm: ArmSpec,
    seed: u64,
}

impl RewardTape {
    pub fn new(arm: &ArmSpec, seed: u64) -> Self {
        Self { arm: arm.clone(), seed }
    }

    /// Raw reward at 1-based `pull_index`.
    pub fn sample(&self, pull_index: u64) -> f64 {
        assert!(pull_index >= 1, "pull indices start at 1");
        let u = Stream::at(self.seed, StreamId::Tape(self.arm.id), pull_index - 1).uniform();
        self.arm.distribution.sample(self.arm.mean, self.arm.cap, u)
    }

    /// Sequential reader starting at pull index 1.
    pub fn cursor(&self) -> TapeCursor {
        TapeCursor { arm: self.arm.clone(), stream: Stream::new(self.seed, StreamId::Tape(self.arm.id)), next_index: 1 }
    }
}

/// Sequential view of a [`RewardTape`]; the `l`-th call returns `sample(l)`.
#[derive(Debug, Clone)]
pub struct TapeCursor {
    arm: ArmSpec,
    stream: Stream,
    next_index: u64,
}

impl TapeCursor {
    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn next_raw(&mut self) -> f64 {
        self.next_index += 1;
        let u = self.stream.uniform();
        self.arm.distribution.sample(self.arm.mean, self.arm.cap, u)
    }
}

/// Episode phase as seen in the round log and in announcements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// A plain bandit policy, no mechanism.
    Bandit,
    Bidding,
    PiMab,
    RewardPhase,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Bandit => "bandit",
            Phase::Bidding => "bidding",
            Phase::PiMab => "pi_mab",
            Phase::RewardPhase => "reward_phase",
        }
    }
}

/// Broadcast from the mechanism to every arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Announcement {
    PhaseStart(Phase),
    SecondHighest(f64),
}

/// One of the arm's own pulls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullRecord {
    pub pull_index: u64,
    pub raw: f64,
    pub effort: f64,
    pub delivered: f64,
}

/// Everything an arm may observe: its own pulls and public announcements.
/// No round numbers, no other arms, no policy internals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OwnHistory {
    records: Vec<PullRecord>,
    announcements: Vec<Announcement>,
}

impl OwnHistory {
    pub fn own_pull_count(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn records(&self) -> &[PullRecord] {
        &self.records
    }

    pub fn announcements(&self) -> &[Announcement] {
        &self.announcements
    }

    /// Latest announced second-highest bid.
    pub fn second_highest(&self) -> Option<f64> {
        self.announcements.iter().rev().find_map(|a| match a {
            Announcement::SecondHighest(m) => Some(*m),
            _ => None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.announcements
            .iter()
            .rev()
            .find_map(|a| match a {
                Announcement::PhaseStart(p) => Some(*p),
                _ => None,
            })
            .unwrap_or(Phase::Bandit)
    }

    pub(crate) fn push(&mut self, record: PullRecord) {
        self.records.push(record);
    }

    pub(crate) fn announce(&mut self, a: Announcement) {
        self.announcements.push(a);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// effort >= -raw
    AbsorbBeyondRaw,
    /// effort <= cap - raw
    AboveCap,
    /// honest arms never spend negative effort
    HonestNonNegative,
    NotFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("arm {arm} violated {constraint:?}: raw {raw}, effort {effort}")]
pub struct ConstraintViolation {
    pub arm: usize,
    pub constraint: Constraint,
    pub raw: f64,
    pub effort: f64,
}

/// Checks an effort against the arm's constraints and returns the delivered
/// reward `raw + effort`. Round-off within [`EPS`] of a bound is snapped onto
/// the bound; anything beyond it is a violation.
pub fn validate_effort(spec: &ArmSpec, raw: f64, effort: f64) -> Result<f64, ConstraintViolation> {
    let fail = |constraint| Err(ConstraintViolation { arm: spec.id, constraint, raw, effort });
    if !effort.is_finite() {
        return fail(Constraint::NotFinite);
    }
    if spec.honest && effort < -EPS {
        return fail(Constraint::HonestNonNegative);
    }
    if effort < -raw - EPS {
        return fail(Constraint::AbsorbBeyondRaw);
    }
    if effort > spec.cap - raw + EPS {
        return fail(Constraint::AboveCap);
    }
    Ok((raw + effort).clamp(0.0, spec.cap))
}

/// One row of the per-round log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundEntry {
    pub round: u64,
    pub arm: usize,
    pub raw: f64,
    pub effort: f64,
    pub delivered: f64,
    pub blocked: bool,
    pub phase: Phase,
}

/// Result of one episode. All quantities are realized, not expected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    pub horizon: u64,
    pub seed: u64,
    pub pulls: Vec<u64>,
    pub effort: Vec<f64>,
    pub cost: Vec<f64>,
    pub utility: Vec<f64>,
    pub revenue: f64,
    pub phase_marks: Vec<u64>,
    pub bids: Option<Vec<f64>>,
    pub second_highest: Option<f64>,
    pub blocked_arms: Vec<usize>,
    /// Blocked arms still receive reward-phase rounds.
    pub blocked_arms_paid: bool,
    #[serde(skip)]
    pub round_log: Vec<RoundEntry>,
}

impl EpisodeOutcome {
    /// Sequence of pulled arms, in round order.
    pub fn pull_sequence(&self) -> Vec<usize> {
        self.round_log.iter().map(|e| e.arm).collect()
    }

    /// Checks the conservation and range invariants against the log.
    pub fn check_invariants(&self, instance: &Instance) -> Result<(), String> {
        let total: u64 = self.pulls.iter().sum();
        if total != self.horizon || self.round_log.len() as u64 != self.horizon {
            return Err(format!(
                "pull counts sum to {total}, log has {} rows, horizon {}",
                self.round_log.len(),
                self.horizon
            ));
        }
        let mut revenue = 0.0;
        let mut counts = vec![0u64; instance.k()];
        for e in &self.round_log {
            let spec = instance.arm(e.arm);
            if !(0.0..=1.0).contains(&e.delivered) || e.delivered > spec.cap + EPS {
                return Err(format!("round {}: delivered {} out of range", e.round, e.delivered));
            }
            if spec.honest && e.effort < -EPS {
                return Err(format!("round {}: honest arm {} effort {}", e.round, e.arm, e.effort));
            }
            if (e.raw + e.effort - e.delivered).abs() > 1e-9 {
                return Err(format!("round {}: delivered != raw + effort", e.round));
            }
            revenue += e.delivered;
            counts[e.arm] += 1;
        }
        if counts != self.pulls {
            return Err("per-arm pull counts disagree with the log".into());
        }
        if (revenue - self.revenue).abs() > 1e-9 * self.horizon.max(1) as f64 {
            return Err(format!("revenue {} differs from log sum {revenue}", self.revenue));
        }
        Ok(())
    }
}
