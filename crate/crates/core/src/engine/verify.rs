//! Empirical checks of the incentive and revenue properties.
//!
//! Path-wise claims (monotonicity, exact FATA) use coupled replay on every
//! seed. Claims about expectations use Monte Carlo means with 95% intervals.
//! The `o(n)` slack is instantiated as `c_s * sqrt(n ln n)`.

use serde::Serialize;

use super::stats::{ratio_ci, verdict, MeanCi, RatioCi, Verdict};
use super::{coupled_replay, run_episode, validate_profile, Engine, EpisodeError, MonteCarloSummary, Principal};
use crate::algorithms::PolicyConfig;
use crate::model::Instance;
use crate::strategies::{check_top_arm_condition, ConditionReport, StrategySpec};

/// Default slack coefficient `c_s`.
pub const DEFAULT_SLACK: f64 = 4.0;
/// Default deviation tolerance `tau`.
pub const DEFAULT_TAU: f64 = 0.05;

/// `c_s * sqrt(n ln n)`.
pub fn slack(horizon: u64, coefficient: f64) -> f64 {
    let n = horizon as f64;
    coefficient * (n * n.ln()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub deviating_arm: usize,
    pub seeds: usize,
    /// Seeds on which the subsequence property failed.
    pub subsequence_violations: Vec<u64>,
    /// Seeds on which some other arm gained pulls.
    pub count_violations: Vec<u64>,
    pub holds: bool,
}

/// Coupled replay of `profile` against `alt` for one arm on every seed.
pub fn verify_monotonicity(
    engine: &Engine,
    instance: &Instance,
    principal: &Principal,
    profile: &[StrategySpec],
    deviating_arm: impl Fn(u64) -> usize + Sync + Send,
    alt: &StrategySpec,
    seeds: &[u64],
) -> Result<MonotonicityReport, EpisodeError> {
    let rows = engine.map_seeds(seeds, |seed| {
        let arm = deviating_arm(seed);
        coupled_replay(instance, principal, profile, arm, alt, seed)
            .map(|pair| (seed, arm, pair.subsequence_holds(), pair.others_not_increased()))
    });
    let rows: Vec<_> = rows.into_iter().collect::<Result<_, _>>()?;
    let subsequence_violations: Vec<u64> = rows.iter().filter(|r| !r.2).map(|r| r.0).collect();
    let count_violations: Vec<u64> = rows.iter().filter(|r| !r.3).map(|r| r.0).collect();
    Ok(MonotonicityReport {
        deviating_arm: rows.first().map_or(0, |r| r.1),
        seeds: seeds.len(),
        holds: subsequence_violations.is_empty() && count_violations.is_empty(),
        subsequence_violations,
        count_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FataReport {
    /// Largest `|T_i(t) - T_j(t)|` over all rounds, pairs and seeds.
    Exact { max_discrepancy: u64, violations: usize, holds: bool },
    /// Pairwise overlap of the per-arm 95% intervals of `T_i(n)`.
    Statistical { pulls: Vec<MeanCi>, non_overlapping_pairs: Vec<(usize, usize)>, holds: bool },
}

/// FATA for the arms in `subset`, which must all deliver the same constant.
/// UCB is checked exactly on every round; other policies statistically.
pub fn verify_fata(
    engine: &Engine,
    instance: &Instance,
    policy: &PolicyConfig,
    profile: &[StrategySpec],
    subset: &[usize],
    seeds: &[u64],
) -> Result<FataReport, EpisodeError> {
    validate_profile(instance, profile)?;
    let principal = Principal::Policy(*policy);
    if subset.len() < 2 {
        return Ok(match policy {
            PolicyConfig::Ucb { .. } => FataReport::Exact { max_discrepancy: 0, violations: 0, holds: true },
            PolicyConfig::EpsGreedy { .. } => {
                FataReport::Statistical { pulls: Vec::new(), non_overlapping_pairs: Vec::new(), holds: true }
            }
        });
    }
    match policy {
        PolicyConfig::Ucb { .. } => {
            let per_seed = engine.map_seeds(seeds, |seed| {
                run_episode(instance, &principal, profile, seed).map(|o| {
                    let mut counts = vec![0i64; instance.k()];
                    let mut worst = 0u64;
                    for e in &o.round_log {
                        counts[e.arm] += 1;
                        let vals = subset.iter().map(|&i| counts[i]);
                        let (lo, hi) = vals.fold((i64::MAX, i64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
                        worst = worst.max((hi - lo) as u64);
                    }
                    worst
                })
            });
            let per_seed: Vec<u64> = per_seed.into_iter().collect::<Result<_, _>>()?;
            let violations = per_seed.iter().filter(|&&d| d > 1).count();
            Ok(FataReport::Exact {
                max_discrepancy: per_seed.into_iter().max().unwrap_or(0),
                violations,
                holds: violations == 0,
            })
        }
        PolicyConfig::EpsGreedy { .. } => {
            let summary = engine.monte_carlo(instance, &principal, profile, seeds)?;
            let pulls: Vec<MeanCi> = subset.iter().map(|&i| summary.arms[i].pulls).collect();
            let mut bad = Vec::new();
            for a in 0..subset.len() {
                for b in a + 1..subset.len() {
                    if !pulls[a].overlaps(&pulls[b]) {
                        bad.push((subset[a], subset[b]));
                    }
                }
            }
            Ok(FataReport::Statistical { holds: bad.is_empty(), pulls, non_overlapping_pairs: bad })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpAdaptivityReport {
    pub test_arm: usize,
    pub pulls: MeanCi,
    pub effort: MeanCi,
    /// `T_hat / n`.
    pub pull_share: f64,
    pub alpha_threshold: f64,
    /// Whether the pull share reached the threshold, making the check active.
    pub active: bool,
    /// `(mu_h - mu_i) * T_hat - slack`.
    pub required_effort: f64,
    pub slack: f64,
    pub holds: bool,
}

/// When the test arm captures at least `alpha_threshold * n` pulls, its
/// effort must be at least `(mu_h - mu_i) * T_hat - slack`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_sharp_adaptivity(
    engine: &Engine,
    instance: &Instance,
    principal: &Principal,
    profile: &[StrategySpec],
    test_arm: usize,
    alpha_threshold: f64,
    slack_coefficient: f64,
    seeds: &[u64],
) -> Result<SharpAdaptivityReport, EpisodeError> {
    let summary = engine.monte_carlo(instance, principal, profile, seeds)?;
    let n = instance.horizon();
    let arm = &summary.arms[test_arm];
    let gap = instance.honest_mean() - instance.arm(test_arm).mean;
    let s = slack(n, slack_coefficient);
    let pull_share = arm.pulls.mean / n as f64;
    let active = pull_share >= alpha_threshold;
    let required_effort = gap * arm.pulls.mean - s;
    Ok(SharpAdaptivityReport {
        test_arm,
        pulls: arm.pulls,
        effort: arm.effort,
        pull_share,
        alpha_threshold,
        active,
        required_effort,
        slack: s,
        holds: !active || arm.effort.mean >= required_effort,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub arm: usize,
    pub baseline: Vec<StrategySpec>,
    pub deviation: StrategySpec,
    pub baseline_utility: MeanCi,
    pub deviation_utility: MeanCi,
    pub ratio: RatioCi,
    pub tau: f64,
    pub verdict: Verdict,
    pub baseline_summary: MonteCarloSummary,
    pub deviation_summary: MonteCarloSummary,
}

/// Ratio of the arm's mean utility after deviating to its mean utility under
/// `profile`. Both profiles run on the same seed list.
#[allow(clippy::too_many_arguments)]
pub fn deviation_ratio(
    engine: &Engine,
    instance: &Instance,
    principal: &Principal,
    profile: &[StrategySpec],
    arm: usize,
    alt: &StrategySpec,
    seeds: &[u64],
    tau: f64,
) -> Result<DeviationReport, EpisodeError> {
    let mut alt_profile = profile.to_vec();
    alt_profile[arm] = alt.clone();
    let base = engine.monte_carlo(instance, principal, profile, seeds)?;
    let dev = if alt_profile == profile {
        base.clone()
    } else {
        engine.monte_carlo(instance, principal, &alt_profile, seeds)?
    };
    let (bu, du) = (base.arms[arm].utility, dev.arms[arm].utility);
    let ratio = ratio_ci(&du, &bu);
    Ok(DeviationReport {
        arm,
        baseline: profile.to_vec(),
        deviation: alt.clone(),
        baseline_utility: bu,
        deviation_utility: du,
        ratio,
        tau,
        verdict: verdict(&ratio, &bu, tau),
        baseline_summary: base,
        deviation_summary: dev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub horizon: u64,
    pub k: usize,
    /// `n * max mu - P(n)`.
    pub regret: MeanCi,
    /// `regret / (n^(2/3) k^(1/3) (ln n)^(1/3))`.
    pub normalized: f64,
}

pub fn regret_normalizer(horizon: u64, k: usize) -> f64 {
    let n = horizon as f64;
    n.powf(2.0 / 3.0) * (k as f64).cbrt() * n.ln().cbrt()
}

/// Regret in the ordinary stochastic setting: every arm plays passively.
pub fn regret_ordinary(
    engine: &Engine,
    instance: &Instance,
    policy: &PolicyConfig,
    seeds: &[u64],
) -> Result<RegretReport, EpisodeError> {
    let profile = vec![StrategySpec::HonestPassive; instance.k()];
    let summary = engine.monte_carlo(instance, &Principal::Policy(*policy), &profile, seeds)?;
    let n = instance.horizon();
    let best = instance.best_mean() * n as f64;
    let regret = MeanCi { mean: best - summary.revenue.mean, ..summary.revenue };
    Ok(RegretReport {
        horizon: n,
        k: instance.k(),
        regret,
        normalized: regret.mean / regret_normalizer(n, instance.k()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueFloorRow {
    pub profile: Vec<StrategySpec>,
    pub revenue_rate: MeanCi,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueFloorReport {
    /// `mu_h - slack / n`.
    pub floor: f64,
    pub rows: Vec<RevenueFloorRow>,
    /// Index of the profile with the lowest mean revenue.
    pub worst: usize,
    pub holds: bool,
}

pub fn revenue_floor_check(
    engine: &Engine,
    instance: &Instance,
    principal: &Principal,
    profiles: &[Vec<StrategySpec>],
    seeds: &[u64],
    slack_coefficient: f64,
) -> Result<RevenueFloorReport, EpisodeError> {
    let n = instance.horizon();
    let floor = instance.honest_mean() - slack(n, slack_coefficient) / n as f64;
    let mut rows = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let s = engine.monte_carlo(instance, principal, profile, seeds)?;
        rows.push(RevenueFloorRow {
            profile: profile.clone(),
            revenue_rate: s.revenue_rate,
            holds: s.revenue_rate.mean >= floor,
        });
    }
    let worst =
        (0..rows.len()).min_by(|&a, &b| rows[a].revenue_rate.mean.total_cmp(&rows[b].revenue_rate.mean)).unwrap_or(0);
    Ok(RevenueFloorReport { floor, holds: rows.iter().all(|r| r.holds), rows, worst })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuboptimalEquilibriumReport {
    pub condition: ConditionReport,
    pub alpha: f64,
    pub revenue_rate: MeanCi,
    /// `P_hat / n <= alpha * maxall`.
    pub suboptimal: bool,
    /// Top arm with the fewest pulls under the supplied profile.
    pub deviator: usize,
    pub deviation: DeviationReport,
    /// The deviation is profitable with a ratio interval above 1.
    pub holds: bool,
}

/// Falsification harness on one supplied profile: if the profile's revenue
/// is at most `alpha * maxall` on an instance meeting the top-arm condition,
/// the least-pulled top arm should profit from always delivering its cap.
#[allow(clippy::too_many_arguments)]
pub fn no_suboptimal_equilibrium(
    engine: &Engine,
    instance: &Instance,
    principal: &Principal,
    profile: &[StrategySpec],
    alpha: f64,
    seeds: &[u64],
    tau: f64,
) -> Result<SuboptimalEquilibriumReport, EpisodeError> {
    let condition = check_top_arm_condition(instance);
    let summary = engine.monte_carlo(instance, principal, profile, seeds)?;
    let deviator = instance
        .top_set()
        .into_iter()
        .min_by(|&a, &b| summary.arms[a].pulls.mean.total_cmp(&summary.arms[b].pulls.mean))
        .expect("top set is never empty");
    let deviation =
        deviation_ratio(engine, instance, principal, profile, deviator, &StrategySpec::TopPerformance, seeds, tau)?;
    let suboptimal = summary.revenue_rate.mean <= alpha * instance.maxall();
    Ok(SuboptimalEquilibriumReport {
        holds: deviation.verdict == Verdict::Profitable && deviation.ratio.lower > 1.0,
        condition,
        alpha,
        revenue_rate: summary.revenue_rate,
        suboptimal,
        deviator,
        deviation,
    })
}
