//! Arm strategies and the linear-cost sustainability machinery.
//!
//! A strategy sees its own [`ArmContext`] (static spec plus horizon), its
//! [`OwnHistory`], the raw reward just sampled and a private random stream.
//! Nothing else is reachable through the trait.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ArmSpec, Instance, OwnHistory, Phase, EPS};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("arm {arm}: strategy {strategy} needs the second-highest bid announcement")]
    MissingAnnouncement { arm: usize, strategy: String },
    #[error("arm {arm}: strategy {strategy} precondition failed: {reason}")]
    PreconditionFailed { arm: usize, strategy: String, reason: String },
    #[error("arm {arm}: distribution support is not contained in the grid")]
    UnsupportedDistribution { arm: usize },
}

/// Static information an arm knows about itself.
#[derive(Debug, Clone, Copy)]
pub struct ArmContext<'a> {
    pub spec: &'a ArmSpec,
    pub horizon: u64,
}

impl ArmContext<'_> {
    /// `1 / ln n`, the margin used above the announced second-highest bid.
    pub fn log_margin(&self) -> f64 {
        1.0 / (self.horizon as f64).ln()
    }
}

pub trait Strategy: Send + Sync {
    /// Effort to add to `raw` on the current pull.
    fn effort(&self, ctx: &ArmContext, history: &OwnHistory, raw: f64, rng: &mut Stream) -> Result<f64, StrategyError>;

    fn descriptor(&self) -> String;
}

/// Library strategies, as written in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", from = "StrategyDoc")]
pub enum StrategySpec {
    HonestPassive,
    TopPerformance,
    AbsorbAll,
    ConstantTarget {
        level: f64,
    },
    SpPiEquilibrium,
    HonestTopMixture {
        /// Fixed delivered mean; defaults to `m' + 1/ln n` from the announcement.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<f64>,
    },
    FirstPullOvershoot {
        first: f64,
        then: f64,
    },
    /// Delivers `level` for the first `switch_after` own pulls, then absorbs.
    MimicThenAbsorb {
        level: f64,
        switch_after: u64,
    },
    /// Bids `bid` in the bidding phase and delivers `level` afterwards;
    /// absorbs in the reward phase unless honest.
    SpPiMisreport {
        bid: f64,
        level: f64,
    },
}

/// Parsing form of [`StrategySpec`]. Field-less strategies are empty struct
/// variants here so that stray keys are rejected for them as well.
#[derive(Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
enum StrategyDoc {
    HonestPassive {},
    TopPerformance {},
    AbsorbAll {},
    ConstantTarget {
        level: f64,
    },
    SpPiEquilibrium {},
    HonestTopMixture {
        #[serde(default)]
        target: Option<f64>,
    },
    FirstPullOvershoot {
        first: f64,
        then: f64,
    },
    MimicThenAbsorb {
        level: f64,
        switch_after: u64,
    },
    SpPiMisreport {
        bid: f64,
        level: f64,
    },
}

impl From<StrategyDoc> for StrategySpec {
    fn from(d: StrategyDoc) -> Self {
        match d {
            StrategyDoc::HonestPassive {} => StrategySpec::HonestPassive,
            StrategyDoc::TopPerformance {} => StrategySpec::TopPerformance,
            StrategyDoc::AbsorbAll {} => StrategySpec::AbsorbAll,
            StrategyDoc::ConstantTarget { level } => StrategySpec::ConstantTarget { level },
            StrategyDoc::SpPiEquilibrium {} => StrategySpec::SpPiEquilibrium,
            StrategyDoc::HonestTopMixture { target } => StrategySpec::HonestTopMixture { target },
            StrategyDoc::FirstPullOvershoot { first, then } => StrategySpec::FirstPullOvershoot { first, then },
            StrategyDoc::MimicThenAbsorb { level, switch_after } => {
                StrategySpec::MimicThenAbsorb { level, switch_after }
            }
            StrategyDoc::SpPiMisreport { bid, level } => StrategySpec::SpPiMisreport { bid, level },
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::HonestPassive => write!(f, "honest_passive"),
            StrategySpec::TopPerformance => write!(f, "top_performance"),
            StrategySpec::AbsorbAll => write!(f, "absorb_all"),
            StrategySpec::ConstantTarget { level } => write!(f, "constant_target({level})"),
            StrategySpec::SpPiEquilibrium => write!(f, "sp_pi_equilibrium"),
            StrategySpec::HonestTopMixture { target: None } => write!(f, "honest_top_mixture"),
            StrategySpec::HonestTopMixture { target: Some(t) } => write!(f, "honest_top_mixture({t})"),
            StrategySpec::FirstPullOvershoot { first, then } => write!(f, "first_pull_overshoot({first}, {then})"),
            StrategySpec::MimicThenAbsorb { level, switch_after } => {
                write!(f, "mimic_then_absorb({level}, {switch_after})")
            }
            StrategySpec::SpPiMisreport { bid, level } => write!(f, "sp_pi_misreport({bid}, {level})"),
        }
    }
}

impl StrategySpec {
    /// Static compatibility check against the arm that will play it.
    pub fn validate_for(&self, spec: &ArmSpec) -> Result<(), StrategyError> {
        let fail = |reason: String| {
            Err(StrategyError::PreconditionFailed { arm: spec.id, strategy: self.to_string(), reason })
        };
        let level_ok = |x: f64| x.is_finite() && (0.0..=spec.cap + EPS).contains(&x);
        match self {
            StrategySpec::AbsorbAll if spec.honest => {
                fail("honest arms never spend negative effort, so they cannot absorb rewards".into())
            }
            StrategySpec::MimicThenAbsorb { .. } if spec.honest => {
                fail("honest arms never spend negative effort, so they cannot absorb rewards".into())
            }
            StrategySpec::ConstantTarget { level } | StrategySpec::MimicThenAbsorb { level, .. }
                if !level_ok(*level) =>
            {
                fail(format!("level {level} outside [0, cap {}]", spec.cap))
            }
            StrategySpec::FirstPullOvershoot { first, then } if !level_ok(*first) || !level_ok(*then) => {
                fail(format!("levels ({first}, {then}) outside [0, cap {}]", spec.cap))
            }
            StrategySpec::SpPiMisreport { bid, level } if !level_ok(*bid) || !level_ok(*level) => {
                fail(format!("levels ({bid}, {level}) outside [0, cap {}]", spec.cap))
            }
            StrategySpec::HonestTopMixture { .. } if !spec.honest => {
                fail("mixture strategy is defined for honest arms".into())
            }
            StrategySpec::HonestTopMixture { target: Some(t) } if !level_ok(*t) => {
                fail(format!("target {t} outside [0, cap {}]", spec.cap))
            }
            _ => Ok(()),
        }?;
        if spec.honest {
            // a fixed level below some raw value would need negative effort
            let top_raw = spec.atoms().iter().filter(|a| a.1 > 0.0).map(|a| a.0).fold(0.0, f64::max);
            let levels: &[f64] = match self {
                StrategySpec::ConstantTarget { level } => &[*level],
                StrategySpec::FirstPullOvershoot { first, then } => &[*first, *then],
                StrategySpec::SpPiMisreport { bid, level } => &[*bid, *level],
                _ => &[],
            };
            if let Some(l) = levels.iter().find(|&&l| l < top_raw - EPS) {
                return fail(format!(
                    "honest arms never spend negative effort, so level {l} cannot sit below the raw value {top_raw}"
                ));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

fn absorb_unless_honest(spec: &ArmSpec, raw: f64) -> f64 {
    if spec.honest {
        0.0
    } else {
        -raw
    }
}

impl Strategy for StrategySpec {
    fn effort(&self, ctx: &ArmContext, history: &OwnHistory, raw: f64, rng: &mut Stream) -> Result<f64, StrategyError> {
        let spec = ctx.spec;
        let missing = || StrategyError::MissingAnnouncement { arm: spec.id, strategy: self.to_string() };
        Ok(match self {
            StrategySpec::HonestPassive => 0.0,
            StrategySpec::TopPerformance => spec.cap - raw,
            StrategySpec::AbsorbAll => -raw,
            StrategySpec::ConstantTarget { level } => level - raw,
            StrategySpec::FirstPullOvershoot { first, then } => {
                if history.own_pull_count() == 0 {
                    first - raw
                } else {
                    then - raw
                }
            }
            StrategySpec::MimicThenAbsorb { level, switch_after } => {
                if history.own_pull_count() < *switch_after {
                    level - raw
                } else {
                    -raw
                }
            }
            StrategySpec::SpPiEquilibrium => match history.phase() {
                Phase::Bidding => spec.cap - raw,
                Phase::PiMab | Phase::Bandit => {
                    let m = history.second_highest().ok_or_else(missing)?;
                    let level = equilibrium_level(spec.cap, m, ctx.log_margin());
                    if !spec.honest || spec.cap <= m + EPS {
                        level - raw
                    } else if spec.mean >= level {
                        0.0
                    } else {
                        // an honest arm above m' reaches the level in mean without absorbing
                        let plan = MixturePlan::new(spec, level).map_err(|reason| {
                            StrategyError::PreconditionFailed { arm: spec.id, strategy: self.to_string(), reason }
                        })?;
                        plan.effort(raw, rng.uniform())
                    }
                }
                Phase::RewardPhase => absorb_unless_honest(spec, raw),
            },
            StrategySpec::SpPiMisreport { bid, level } => match history.phase() {
                Phase::Bidding => bid - raw,
                Phase::PiMab | Phase::Bandit => level - raw,
                Phase::RewardPhase => absorb_unless_honest(spec, raw),
            },
            StrategySpec::HonestTopMixture { target } => {
                let target_level = || match target {
                    Some(t) => Ok(*t),
                    None => history.second_highest().map(|m| m + ctx.log_margin()).ok_or_else(missing),
                };
                match history.phase() {
                    Phase::Bidding => spec.cap - raw,
                    Phase::RewardPhase => 0.0,
                    Phase::PiMab | Phase::Bandit => {
                        let plan = MixturePlan::new(spec, target_level()?).map_err(|reason| {
                            StrategyError::PreconditionFailed { arm: spec.id, strategy: self.to_string(), reason }
                        })?;
                        plan.effort(raw, rng.uniform())
                    }
                }
            }
        })
    }

    fn descriptor(&self) -> String {
        self.to_string()
    }
}

/// PI-phase delivery of the equilibrium profile: the cap when it does not
/// exceed `m'`, otherwise `m' + 1/ln n` (never above the cap).
pub fn equilibrium_level(cap: f64, second_highest: f64, margin: f64) -> f64 {
    if cap <= second_highest + EPS {
        cap
    } else {
        (second_highest + margin).min(cap)
    }
}

/// Which lift rule the mixture strategy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureCase {
    /// Lift draws at or above the target to the cap with probability `p`.
    LiftHigh,
    /// Always lift high draws to the cap; lift low draws to the target with
    /// probability `p`.
    LiftLow,
}

/// Parameters of the never-degrading mixture that moves an honest arm's
/// delivered mean to exactly `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixturePlan {
    pub target: f64,
    pub cap: f64,
    pub p_down: f64,
    pub mean_down: f64,
    pub p_up: f64,
    pub mean_up: f64,
    pub case: MixtureCase,
    pub p: f64,
}

impl MixturePlan {
    pub fn new(spec: &ArmSpec, target: f64) -> Result<Self, String> {
        if spec.mean >= target {
            return Err(format!("mean {} already reaches target {target}", spec.mean));
        }
        if target > spec.cap + EPS {
            return Err(format!("target {target} exceeds cap {}", spec.cap));
        }
        let (mut p_down, mut s_down, mut p_up, mut s_up) = (0.0, 0.0, 0.0, 0.0);
        for (v, q) in spec.atoms() {
            if v >= target {
                p_up += q;
                s_up += v * q;
            } else {
                p_down += q;
                s_down += v * q;
            }
        }
        let mean_down = if p_down > 0.0 { s_down / p_down } else { 0.0 };
        let mean_up = if p_up > 0.0 { s_up / p_up } else { 0.0 };
        let cap = spec.cap;
        // lifting every high draw to the cap and nothing else yields this mean
        let high_only = p_up * cap + p_down * mean_down;
        let (case, p) = if high_only >= target {
            (MixtureCase::LiftHigh, (target - p_down * mean_down - p_up * mean_up) / (p_up * (cap - mean_up)))
        } else {
            (MixtureCase::LiftLow, (target - p_up * cap - p_down * mean_down) / (p_down * (target - mean_down)))
        };
        Ok(Self { target, cap, p_down, mean_down, p_up, mean_up, case, p: p.clamp(0.0, 1.0) })
    }

    /// Effort for one pull given the raw reward and a uniform coin.
    pub fn effort(&self, raw: f64, coin: f64) -> f64 {
        let lift = coin < self.p;
        match (raw >= self.target, self.case) {
            (true, MixtureCase::LiftHigh) if lift => self.cap - raw,
            (true, MixtureCase::LiftLow) => self.cap - raw,
            (false, MixtureCase::LiftLow) if lift => self.target - raw,
            _ => 0.0,
        }
    }

    /// Exact delivered mean over the atoms of `spec`.
    pub fn expected_delivery(&self, spec: &ArmSpec) -> f64 {
        spec.atoms()
            .into_iter()
            .map(|(v, q)| {
                let lifted = v + self.effort(v, 0.0);
                let kept = v + self.effort(v, 1.0);
                q * (self.p * lifted + (1.0 - self.p) * kept)
            })
            .sum()
    }
}

/// Finite reward grid for the sustainability analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
}

impl Default for Grid {
    /// `{0, 0.05, ..., 1}`.
    fn default() -> Self {
        Self::uniform(20)
    }
}

impl Grid {
    /// `{0, 1/steps, ..., 1}`.
    pub fn uniform(steps: u32) -> Self {
        Self { points: (0..=steps).map(|i| i as f64 / steps as f64).collect() }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn contains(&self, x: f64) -> bool {
        self.points.iter().any(|&p| (p - x).abs() <= 1e-9)
    }
}

/// Tabulated `g(x) = E[f(x - r)]` and the largest sustainable level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SustainabilityReport {
    pub arm: usize,
    pub g_table: Vec<(f64, f64)>,
    pub m_f: f64,
    pub sustainable: bool,
}

/// Expected linear cost of delivering `x` on average: `a (x - mean)`.
pub fn expected_cost(spec: &ArmSpec, x: f64) -> f64 {
    spec.atoms().iter().map(|&(r, q)| q * spec.cost(x - r)).sum()
}

pub fn compute_sustainability(spec: &ArmSpec, grid: &Grid) -> Result<SustainabilityReport, StrategyError> {
    if spec.atoms().iter().any(|&(v, q)| q > 0.0 && !grid.contains(v)) {
        return Err(StrategyError::UnsupportedDistribution { arm: spec.id });
    }
    let g_table: Vec<(f64, f64)> =
        grid.points().iter().filter(|&&x| x <= spec.cap + EPS).map(|&x| (x, expected_cost(spec, x))).collect();
    // g(0) = -a mean <= 0 < 1, so the grid point 0 always qualifies
    let m_f = g_table.iter().filter(|(_, g)| 1.0 - g > 0.0).map(|&(x, _)| x).fold(0.0, f64::max);
    Ok(SustainabilityReport { arm: spec.id, g_table, m_f, sustainable: (m_f - spec.cap).abs() <= 1e-9 })
}

/// Evaluation of the two top-arm-count conditions for ruling out
/// sub-optimal revenue equilibria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub k_top: usize,
    pub maxall: f64,
    /// `2 / min over top arms of (1 + mean - maxall)`.
    pub threshold: f64,
    /// Largest slack `eps` with `k_top > threshold (1 + eps)`; negative when it fails.
    pub margin: f64,
    pub holds: bool,
    /// `min over top arms of (1 - g(0)) / (1 - g(maxall))` under each arm's linear cost.
    pub cost_threshold: f64,
    pub cost_margin: f64,
    pub cost_holds: bool,
}

pub fn check_top_arm_condition(instance: &Instance) -> ConditionReport {
    let top = instance.top_set();
    let maxall = instance.maxall();
    let k_top = top.len();
    let gap = top.iter().map(|&i| 1.0 + instance.arm(i).mean - maxall).fold(f64::INFINITY, f64::min);
    let threshold = if gap > 0.0 { 2.0 / gap } else { f64::INFINITY };
    let cost_threshold = top
        .iter()
        .map(|&i| {
            let spec = instance.arm(i);
            let denom = 1.0 - expected_cost(spec, maxall);
            if denom > 0.0 {
                (1.0 - expected_cost(spec, 0.0)) / denom
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    let margin = k_top as f64 / threshold - 1.0;
    let cost_margin = k_top as f64 / cost_threshold - 1.0;
    ConditionReport {
        k_top,
        maxall,
        threshold,
        margin,
        holds: margin > 0.0,
        cost_threshold,
        cost_margin,
        cost_holds: cost_margin > 0.0,
    }
}
