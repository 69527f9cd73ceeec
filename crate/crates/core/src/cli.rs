//! Run configurations, scenario presets and result emission for the
//! `strat-bandit` binary.
//!
//! Exit codes: 0 when every verdict passes, 1 when a verdict fails or an
//! episode aborts, 2 when the configuration is unreadable or rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::algorithms::{PolicyConfig, TieBreak, DEFAULT_EPS_C};
use crate::engine::verify::{
    deviation_ratio, estimate_sharp_adaptivity, no_suboptimal_equilibrium, regret_ordinary, revenue_floor_check,
    verify_fata, verify_monotonicity, FataReport, DEFAULT_SLACK, DEFAULT_TAU,
};
use crate::engine::{
    run_episode, seed_range, strategy_moments, validate_profile, write_round_log, Engine, EpisodeError, Principal,
    Verdict,
};
use crate::mechanism::SpPiConfig;
use crate::model::{build_instance, Instance, InstanceConfig};
use crate::strategies::{check_top_arm_condition, StrategyError, StrategySpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    ConfigParse { path: String, message: String },
    #[error("{field}: {message}")]
    ConfigRejected { field: String, message: String },
    #[error("unknown scenario {name:?}; available: {}", .registry.join(", "))]
    UnknownScenario { name: String, registry: Vec<String> },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("episode aborted: {0}")]
    Run(EpisodeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => EXIT_FAIL,
            _ => EXIT_CONFIG,
        }
    }

    fn rejected(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::ConfigRejected { field: field.into(), message: message.into() }
    }
}

impl From<EpisodeError> for CliError {
    fn from(e: EpisodeError) -> Self {
        match e {
            EpisodeError::Profile(
                ref
                s @ (StrategyError::PreconditionFailed { arm, .. } | StrategyError::UnsupportedDistribution { arm }),
            ) => CliError::rejected(format!("profile[{arm}]"), s.to_string()),
            EpisodeError::ProfileSize { .. } => CliError::rejected("profile", e.to_string()),
            EpisodeError::ConfigRejected(m) => CliError::rejected("instance.horizon", m),
            other => CliError::Run(other),
        }
    }
}

/// Who chooses the arm each round, as written in a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PrincipalConfig {
    Ucb {
        #[serde(default)]
        ties: TieBreak,
    },
    EpsGreedy {
        #[serde(default = "default_c")]
        c: f64,
    },
    SpPi {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "PolicyConfig::ucb")]
        inner_policy: PolicyConfig,
        #[serde(default = "default_true")]
        blocking: bool,
    },
}

fn default_c() -> f64 {
    DEFAULT_EPS_C
}

fn default_rho() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Default for PrincipalConfig {
    fn default() -> Self {
        PrincipalConfig::Ucb { ties: TieBreak::LowestId }
    }
}

impl PrincipalConfig {
    pub fn build(&self) -> Result<Principal, CliError> {
        let check_c = |c: f64, field: &str| {
            if c.is_finite() && c > 0.0 {
                Ok(())
            } else {
                Err(CliError::rejected(field, format!("exploration constant must be positive, got {c}")))
            }
        };
        Ok(match *self {
            PrincipalConfig::Ucb { ties } => Principal::Policy(PolicyConfig::Ucb { ties }),
            PrincipalConfig::EpsGreedy { c } => {
                check_c(c, "principal.c")?;
                Principal::Policy(PolicyConfig::EpsGreedy { c })
            }
            PrincipalConfig::SpPi { rho, inner_policy, blocking } => {
                if !(rho.is_finite() && rho > 0.0) {
                    return Err(CliError::rejected("principal.rho", format!("must be positive, got {rho}")));
                }
                if let PolicyConfig::EpsGreedy { c } = inner_policy {
                    check_c(c, "principal.inner_policy.c")?;
                }
                Principal::SpPi(SpPiConfig { rho, inner_policy, blocking })
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_base")]
    pub base: u64,
}

fn default_count() -> usize {
    100
}

fn default_base() -> u64 {
    1
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { count: default_count(), base: default_base() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_slack")]
    pub slack_coefficient: f64,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, slack_coefficient: DEFAULT_SLACK }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Summary JSON; printed to stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    /// Per-round CSV of the first seed's episode, or the trend table of a sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_moment_tolerance() -> f64 {
    0.005
}

/// What to measure. The kind decides which other fields are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// One episode on `seeds.base`; passes when the log invariants hold.
    Episode {},
    /// Aggregates only, no verdict.
    MonteCarlo {},
    /// Coupled replay of `arm` switching to `alt`; passes on zero violations.
    Coupled {
        arm: usize,
        alt: StrategySpec,
    },
    /// Equal-treatment check for the arms in `subset`.
    Fata {
        subset: Vec<usize>,
    },
    SharpAdaptivity {
        test_arm: usize,
        alpha_threshold: f64,
    },
    /// Passes when the verdict equals `expect`, or is not profitable by default.
    Deviation {
        arm: usize,
        alt: StrategySpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Verdict>,
    },
    /// Every arm passive; passes when the normalized regret is within the bound.
    Regret {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_normalized: Option<f64>,
    },
    RevenueFloor {
        profiles: Vec<Vec<StrategySpec>>,
    },
    Scenario {
        name: String,
    },
    /// Passes when the top-arm condition evaluates to `expect_holds`.
    Condition {
        #[serde(default = "default_true")]
        expect_holds: bool,
    },
    NoSuboptimalEquilibrium {
        alpha: f64,
    },
    /// Plays `profile[arm]` on `pulls` pulls of the arm's tape, without a principal.
    StrategyMoments {
        arm: usize,
        pulls: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_mean: Option<f64>,
        #[serde(default = "default_moment_tolerance")]
        tolerance: f64,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Episode {} => "episode",
            Experiment::MonteCarlo {} => "monte-carlo",
            Experiment::Coupled { .. } => "coupled",
            Experiment::Fata { .. } => "fata",
            Experiment::SharpAdaptivity { .. } => "sharp-adaptivity",
            Experiment::Deviation { .. } => "deviation",
            Experiment::Regret { .. } => "regret",
            Experiment::RevenueFloor { .. } => "revenue-floor",
            Experiment::Scenario { .. } => "scenario",
            Experiment::Condition { .. } => "condition",
            Experiment::NoSuboptimalEquilibrium { .. } => "no-suboptimal-equilibrium",
            Experiment::StrategyMoments { .. } => "strategy-moments",
        }
    }

    fn needs_profile(&self) -> bool {
        !matches!(
            self,
            Experiment::Regret { .. }
                | Experiment::RevenueFloor { .. }
                | Experiment::Scenario { .. }
                | Experiment::Condition { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required for every kind except `scenario`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceConfig>,
    #[serde(default)]
    pub principal: PrincipalConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profile: Vec<StrategySpec>,
    #[serde(default)]
    pub seeds: SeedConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Horizon ladder for `sweep`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str, path: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigParse { path: path.to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::ConfigParse { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn set_horizon(&mut self, horizon: u64) {
        if let Some(inst) = self.instance.as_mut() {
            inst.horizon = horizon;
        }
        if let Experiment::StrategyMoments { pulls, .. } = &mut self.experiment {
            *pulls = horizon;
        }
    }
}

/// Validated pieces of a configuration.
struct Prepared {
    instance: Instance,
    principal: Principal,
    seeds: Vec<u64>,
}

fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    let inst_config =
        config.instance.as_ref().ok_or_else(|| CliError::rejected("instance", "required for this experiment kind"))?;
    let instance = build_instance(inst_config).map_err(|e| CliError::rejected("instance", e.to_string()))?;
    let principal = config.principal.build()?;
    let t = &config.tolerance;
    if !(t.tau.is_finite() && t.tau >= 0.0) {
        return Err(CliError::rejected("tolerance.tau", format!("must be non-negative, got {}", t.tau)));
    }
    if !(t.slack_coefficient.is_finite() && t.slack_coefficient >= 0.0) {
        return Err(CliError::rejected(
            "tolerance.slack_coefficient",
            format!("must be non-negative, got {}", t.slack_coefficient),
        ));
    }
    let needs_ci = !matches!(config.experiment, Experiment::Episode {} | Experiment::Condition { .. });
    if needs_ci && config.seeds.count < 2 {
        return Err(CliError::rejected("seeds.count", "intervals need at least 2 seeds"));
    }
    if config.experiment.needs_profile() {
        if config.profile.is_empty() {
            return Err(CliError::rejected(
                "profile",
                format!("required for {} experiments", config.experiment.name()),
            ));
        }
        validate_profile(&instance, &config.profile)?;
    }
    let k = instance.k();
    let arm_field = |field: &str, arm: usize| {
        if arm < k {
            Ok(())
        } else {
            Err(CliError::rejected(format!("experiment.{field}"), format!("arm {arm} out of range for {k} arms")))
        }
    };
    let policy_only = || match principal {
        Principal::Policy(_) => Ok(()),
        Principal::SpPi(_) => Err(CliError::rejected("principal.kind", "this experiment needs a plain policy")),
    };
    match &config.experiment {
        Experiment::Coupled { arm, alt } | Experiment::Deviation { arm, alt, .. } => {
            arm_field("arm", *arm)?;
            alt.validate_for(instance.arm(*arm)).map_err(|e| CliError::rejected("experiment.alt", e.to_string()))?;
        }
        Experiment::Fata { subset } => {
            policy_only()?;
            for &a in subset {
                arm_field("subset", a)?;
            }
        }
        Experiment::SharpAdaptivity { test_arm, alpha_threshold } => {
            arm_field("test_arm", *test_arm)?;
            if !(0.0..=1.0).contains(alpha_threshold) {
                return Err(CliError::rejected("experiment.alpha_threshold", "must lie in [0, 1]"));
            }
        }
        Experiment::Regret { .. } => policy_only()?,
        Experiment::RevenueFloor { profiles } => {
            if profiles.is_empty() {
                return Err(CliError::rejected("experiment.profiles", "at least one profile is required"));
            }
            for (i, p) in profiles.iter().enumerate() {
                validate_profile(&instance, p)
                    .map_err(|e| CliError::rejected(format!("experiment.profiles[{i}]"), e.to_string()))?;
            }
        }
        Experiment::NoSuboptimalEquilibrium { alpha } => {
            if !(0.0..=1.0).contains(alpha) {
                return Err(CliError::rejected("experiment.alpha", "must lie in [0, 1]"));
            }
        }
        Experiment::StrategyMoments { arm, pulls, .. } => {
            arm_field("arm", *arm)?;
            if *pulls == 0 {
                return Err(CliError::rejected("experiment.pulls", "must be positive"));
            }
        }
        Experiment::Episode {}
        | Experiment::MonteCarlo {}
        | Experiment::Scenario { .. }
        | Experiment::Condition { .. } => {}
    }
    if let Principal::SpPi(sp) = &principal {
        sp.validate(instance.horizon(), k)?;
    }
    Ok(Prepared { instance, principal, seeds: seed_range(config.seeds.base, config.seeds.count) })
}

/// Result of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Headline number for trend tables, when the experiment has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<f64>,
    pub result: Value,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// Executes one configuration without writing any file.
pub fn execute(engine: &Engine, config: &RunConfig) -> Result<RunReport, CliError> {
    if let Experiment::Scenario { name } = &config.experiment {
        let report = run_scenario(engine, name, &ScenarioOptions::default())?;
        return Ok(RunReport {
            experiment: "scenario".into(),
            pass: report.pass,
            horizon: None,
            metric: None,
            result: to_value(&report),
        });
    }
    let p = prepare(config)?;
    let (inst, principal, seeds, profile) = (&p.instance, &p.principal, &p.seeds, &config.profile);
    let tol = config.tolerance;
    let (pass, metric, result) = match &config.experiment {
        Experiment::Episode {} => {
            let o = run_episode(inst, principal, profile, config.seeds.base)?;
            let check = o.check_invariants(inst);
            let mut v = to_value(&o);
            v["invariants"] = json!(check.as_ref().err());
            (check.is_ok(), Some(o.revenue / inst.horizon() as f64), v)
        }
        Experiment::MonteCarlo {} => {
            let s = engine.monte_carlo(inst, principal, profile, seeds)?;
            (true, Some(s.revenue_rate.mean), to_value(&s))
        }
        Experiment::Coupled { arm, alt } => {
            let arm = *arm;
            let r = verify_monotonicity(engine, inst, principal, profile, |_| arm, alt, seeds)?;
            (r.holds, None, to_value(&r))
        }
        Experiment::Fata { subset } => {
            let Principal::Policy(policy) = principal else { unreachable!("checked in prepare") };
            let r = verify_fata(engine, inst, policy, profile, subset, seeds)?;
            let holds = match &r {
                FataReport::Exact { holds, .. } | FataReport::Statistical { holds, .. } => *holds,
            };
            (holds, None, to_value(&r))
        }
        Experiment::SharpAdaptivity { test_arm, alpha_threshold } => {
            let r = estimate_sharp_adaptivity(
                engine,
                inst,
                principal,
                profile,
                *test_arm,
                *alpha_threshold,
                tol.slack_coefficient,
                seeds,
            )?;
            (r.holds, Some(r.effort.mean), to_value(&r))
        }
        Experiment::Deviation { arm, alt, expect } => {
            let r = deviation_ratio(engine, inst, principal, profile, *arm, alt, seeds, tol.tau)?;
            let pass = match expect {
                Some(v) => r.verdict == *v,
                None => r.verdict != Verdict::Profitable,
            };
            (pass, Some(r.ratio.ratio), to_value(&r))
        }
        Experiment::Regret { max_normalized } => {
            let Principal::Policy(policy) = principal else { unreachable!("checked in prepare") };
            let r = regret_ordinary(engine, inst, policy, seeds)?;
            (max_normalized.is_none_or(|m| r.normalized <= m), Some(r.normalized), to_value(&r))
        }
        Experiment::RevenueFloor { profiles } => {
            let r = revenue_floor_check(engine, inst, principal, profiles, seeds, tol.slack_coefficient)?;
            let worst = r.rows.get(r.worst).map(|row| row.revenue_rate.mean);
            (r.holds, worst, to_value(&r))
        }
        Experiment::Condition { expect_holds } => {
            let r = check_top_arm_condition(inst);
            (r.holds == *expect_holds, Some(r.margin), to_value(&r))
        }
        Experiment::NoSuboptimalEquilibrium { alpha } => {
            let r = no_suboptimal_equilibrium(engine, inst, principal, profile, *alpha, seeds, tol.tau)?;
            (r.holds, Some(r.deviation.ratio.ratio), to_value(&r))
        }
        Experiment::StrategyMoments { arm, pulls, expect_mean, tolerance } => {
            let m = strategy_moments(inst, *arm, &profile[*arm], *pulls, config.seeds.base)?;
            let close = expect_mean.is_none_or(|t| (m.delivered_mean - t).abs() <= *tolerance);
            (m.violations == 0 && close, Some(m.delivered_mean), to_value(&m))
        }
        Experiment::Scenario { .. } => unreachable!("handled above"),
    };
    Ok(RunReport { experiment: config.experiment.name().into(), pass, horizon: Some(inst.horizon()), metric, result })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Writes the summary (stdout when no path is configured) and the optional CSV.
fn emit(config: &RunConfig, report: &impl Serialize) -> Result<(), CliError> {
    match &config.output.summary {
        Some(path) => write_json(path, report),
        None => {
            println!("{}", serde_json::to_string_pretty(report).expect("reports serialize"));
            Ok(())
        }
    }
}

fn write_episode_csv(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let p = prepare(config)?;
    let o = run_episode(&p.instance, &p.principal, &config.profile, config.seeds.base)?;
    write_round_log(path, &o).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// `strat-bandit run`: execute, emit artifacts and return the exit code.
pub fn run(engine: &Engine, config: &RunConfig) -> Result<i32, CliError> {
    if let Some(path) = &config.output.csv {
        match config.experiment {
            Experiment::Episode {} | Experiment::MonteCarlo {} => write_episode_csv(config, path)?,
            _ => {
                return Err(CliError::rejected(
                    "output.csv",
                    format!(
                        "round logs are written for episode and monte-carlo runs, not {}",
                        config.experiment.name()
                    ),
                ))
            }
        }
    }
    let report = execute(engine, config)?;
    emit(config, &report)?;
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub horizon: u64,
    pub metric: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub experiment: String,
    pub pass: bool,
    pub runs: Vec<RunReport>,
    pub trend: Vec<TrendRow>,
}

/// One run per entry of `horizons`, in order.
pub fn execute_sweep(engine: &Engine, config: &RunConfig) -> Result<SweepReport, CliError> {
    if config.horizons.is_empty() {
        return Err(CliError::rejected("horizons", "sweep needs at least one horizon"));
    }
    if matches!(config.experiment, Experiment::Scenario { .. }) {
        return Err(CliError::rejected("experiment.kind", "scenarios cannot be swept"));
    }
    let mut runs = Vec::with_capacity(config.horizons.len());
    for (i, &h) in config.horizons.iter().enumerate() {
        let mut c = config.clone();
        c.set_horizon(h);
        let report = execute(engine, &c).map_err(|e| match e {
            CliError::ConfigRejected { field, message } => {
                CliError::ConfigRejected { field: format!("horizons[{i}] -> {field}"), message }
            }
            other => other,
        })?;
        runs.push(report);
    }
    let trend =
        runs.iter().map(|r| TrendRow { horizon: r.horizon.unwrap_or(0), metric: r.metric, pass: r.pass }).collect();
    Ok(SweepReport { experiment: config.experiment.name().into(), pass: runs.iter().all(|r| r.pass), runs, trend })
}

/// Plain-text trend table, one line per horizon.
pub fn trend_table(report: &SweepReport) -> String {
    let mut out = format!("{:>12}  {:>14}  pass\n", "horizon", report.experiment);
    for row in &report.trend {
        let metric = row.metric.map_or_else(|| "-".to_string(), |m| format!("{m:.6}"));
        let _ = writeln!(out, "{:>12}  {:>14}  {}", row.horizon, metric, row.pass);
    }
    out
}

/// `strat-bandit sweep`: a single-horizon ladder behaves exactly like `run`.
pub fn sweep(engine: &Engine, config: &RunConfig) -> Result<i32, CliError> {
    if config.horizons.len() == 1 {
        let mut c = config.clone();
        c.set_horizon(config.horizons[0]);
        c.horizons.clear();
        return run(engine, &c);
    }
    let report = execute_sweep(engine, config)?;
    if let Some(path) = &config.output.csv {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
        for row in &report.trend {
            w.serialize(row).map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
        }
        w.flush().map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    }
    eprint!("{}", trend_table(&report));
    emit(config, &report)?;
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

/// A named bundle of configurations with their expected verdicts built in.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub runs: Vec<(&'static str, RunConfig)>,
}

pub const SCENARIOS: [&str; 11] = [
    "thm-4.2-robustness",
    "thm-A.2-ucb-fata",
    "thm-A.1-ucb-monotone",
    "thm-B.1-eps-regret",
    "thm-5.4-top-equilibrium",
    "cond-5.1-check",
    "thm-6.1-sp-pi-equilibrium",
    "remark-6.1-blocking",
    "appendix-D-mixture",
    "appendix-E-non-dominance",
    "thm-F.3-unsustainable",
];

fn bern(mean: f64, cap: f64, honest: bool) -> Value {
    json!({ "mean": mean, "cap": cap, "honest": honest })
}

fn atoms(mean: f64, cap: f64, honest: bool, atoms: &[(f64, f64)], cost: f64) -> Value {
    json!({
        "mean": mean, "cap": cap, "honest": honest, "cost_coefficient": cost,
        "distribution": { "kind": "discrete_finite", "atoms": atoms },
    })
}

fn preset_config(v: Value) -> RunConfig {
    serde_json::from_value(v).expect("preset configurations parse")
}

fn remark_arms(top_cap: f64) -> Value {
    json!([bern(0.1, top_cap, false), bern(0.1, 0.8, true), bern(0.1, 0.3, true)])
}

fn build_preset(name: &str) -> Option<Preset> {
    let passive = json!({ "name": "honest_passive" });
    let top = json!({ "name": "top_performance" });
    let sp_eq = json!({ "name": "sp_pi_equilibrium" });
    let misreport = json!({ "name": "sp_pi_misreport", "bid": 0.1, "level": 0.4 });
    let preset = match name {
        "thm-4.2-robustness" => Preset {
            name: "thm-4.2-robustness",
            description: "UCB revenue stays above the honest benchmark minus slack against absorbing adversaries",
            runs: vec![(
                "floor",
                preset_config(json!({
                    "instance": { "horizon": 20000, "arms": [bern(0.6, 1.0, true), bern(0.3, 1.0, false), bern(0.5, 0.9, false)] },
                    "seeds": { "count": 40 },
                    "experiment": { "kind": "revenue-floor", "profiles": [
                        [passive, { "name": "absorb_all" }, { "name": "absorb_all" }],
                        [passive, { "name": "mimic_then_absorb", "level": 0.65, "switch_after": 5000 },
                                  { "name": "mimic_then_absorb", "level": 0.65, "switch_after": 5000 }],
                        [passive, { "name": "constant_target", "level": 0.5 }, { "name": "constant_target", "level": 0.5 }],
                    ]},
                })),
            )],
        },
        "thm-A.2-ucb-fata" => Preset {
            name: "thm-A.2-ucb-fata",
            description: "two arms delivering the same constant receive UCB pull counts within one of each other on every round",
            runs: vec![(
                "fata",
                preset_config(json!({
                    "instance": { "horizon": 10000, "arms": [bern(0.5, 0.9, true), bern(0.5, 0.9, true)] },
                    "profile": [{ "name": "constant_target", "level": 0.9 }, { "name": "constant_target", "level": 0.9 }],
                    "seeds": { "count": 20 },
                    "experiment": { "kind": "fata", "subset": [0, 1] },
                })),
            )],
        },
        "thm-A.1-ucb-monotone" => Preset {
            name: "thm-A.1-ucb-monotone",
            description: "switching one arm to top performance never adds UCB pulls to any other arm on a coupled replay",
            runs: vec![(
                "coupled",
                preset_config(json!({
                    "instance": { "horizon": 5000, "arms": [bern(0.5, 0.9, false), bern(0.6, 1.0, true), bern(0.4, 0.8, true)] },
                    "profile": [{ "name": "constant_target", "level": 0.55 }, passive, passive],
                    "seeds": { "count": 50 },
                    "experiment": { "kind": "coupled", "arm": 0, "alt": top },
                })),
            )],
        },
        "thm-B.1-eps-regret" => Preset {
            name: "thm-B.1-eps-regret",
            description: "epsilon-greedy regret normalized by n^(2/3) (k ln n)^(1/3) stays bounded; sweep the horizons for the trend",
            runs: vec![(
                "regret",
                preset_config(json!({
                    "instance": { "horizon": 40000, "arms": [bern(0.7, 1.0, true), bern(0.4, 1.0, true)] },
                    "principal": { "kind": "eps-greedy", "c": 1.0 },
                    "seeds": { "count": 30 },
                    "experiment": { "kind": "regret", "max_normalized": 0.5 },
                    "horizons": [10000, 40000, 160000],
                })),
            )],
        },
        "thm-5.4-top-equilibrium" => Preset {
            name: "thm-5.4-top-equilibrium",
            description: "with several top arms under UCB, leaving top performance does not pay",
            runs: ["honest_passive", "absorb_all"]
                .into_iter()
                .zip(["to-passive", "to-absorb"])
                .map(|(alt, label)| {
                    (
                        label,
                        preset_config(json!({
                            "instance": { "horizon": 20000, "arms": [bern(0.7, 0.9, false), bern(0.7, 0.9, false),
                                                                   bern(0.7, 0.9, false), bern(0.5, 0.6, true)] },
                            "profile": [top, top, top, passive],
                            "seeds": { "count": 40 },
                            "experiment": { "kind": "deviation", "arm": 0, "alt": { "name": alt }, "expect": "not_profitable" },
                        })),
                    )
                })
                .collect(),
        },
        "cond-5.1-check" => Preset {
            name: "cond-5.1-check",
            description: "top-arm count condition: four top arms with mean 0.9 satisfy it, two do not",
            runs: vec![
                (
                    "four-top",
                    preset_config(json!({
                        "instance": { "horizon": 1000, "arms": [bern(0.9, 1.0, true), bern(0.9, 1.0, true), bern(0.9, 1.0, true), bern(0.9, 1.0, true)] },
                        "experiment": { "kind": "condition" },
                    })),
                ),
                (
                    "two-top",
                    preset_config(json!({
                        "instance": { "horizon": 1000, "arms": [bern(0.9, 1.0, true), bern(0.9, 1.0, true), bern(0.5, 0.6, true)] },
                        "experiment": { "kind": "condition", "expect_holds": false },
                    })),
                ),
            ],
        },
        "thm-6.1-sp-pi-equilibrium" => Preset {
            name: "thm-6.1-sp-pi-equilibrium",
            description: "under SP+PI with blocking, underbidding and then overdelivering does not pay",
            runs: vec![(
                "misreport",
                preset_config(json!({
                    "instance": { "horizon": 100000, "arms": remark_arms(1.0) },
                    "principal": { "kind": "sp-pi" },
                    "profile": [sp_eq, sp_eq, sp_eq],
                    "seeds": { "count": 20 },
                    "experiment": { "kind": "deviation", "arm": 0, "alt": misreport, "expect": "not_profitable" },
                })),
            )],
        },
        "remark-6.1-blocking" => Preset {
            name: "remark-6.1-blocking",
            description: "the underbidding deviation pays once blocking is removed, on caps (1.0, 0.8, 0.3) and (0.8, 0.8, 0.3)",
            runs: [("caps-1.0", 1.0), ("caps-0.8", 0.8)]
                .into_iter()
                .flat_map(|(tag, cap)| {
                    [(true, "not_profitable"), (false, "profitable")].into_iter().map(move |(blocking, expect)| (tag, cap, blocking, expect))
                })
                .map(|(tag, cap, blocking, expect)| {
                    let label = match (tag, blocking) {
                        ("caps-1.0", true) => "caps-1.0-blocking",
                        ("caps-1.0", false) => "caps-1.0-open",
                        (_, true) => "caps-0.8-blocking",
                        _ => "caps-0.8-open",
                    };
                    (
                        label,
                        preset_config(json!({
                            "instance": { "horizon": 100000, "arms": remark_arms(cap) },
                            "principal": { "kind": "sp-pi", "blocking": blocking },
                            "profile": [sp_eq, sp_eq, sp_eq],
                            "seeds": { "count": 20 },
                            "experiment": { "kind": "deviation", "arm": 0, "alt": misreport, "expect": expect },
                        })),
                    )
                })
                .collect(),
        },
        "appendix-D-mixture" => Preset {
            name: "appendix-D-mixture",
            description: "an honest top arm reaches a delivered mean of 0.9 by mixing cap delivery with passive pulls",
            runs: vec![(
                "moments",
                preset_config(json!({
                    "instance": { "horizon": 1000, "arms": [atoms(0.575, 1.0, true, &[(0.2, 0.5), (0.95, 0.5)], 1.0), bern(0.5, 1.0, true)] },
                    "profile": [{ "name": "honest_top_mixture", "target": 0.9 }, passive],
                    "experiment": { "kind": "strategy-moments", "arm": 0, "pulls": 200000, "expect_mean": 0.9 },
                })),
            )],
        },
        "appendix-E-non-dominance" => Preset {
            name: "appendix-E-non-dominance",
            description: "two arms with caps 1 and means 0.6 > 0.5: against a passive rival, passive beats top performance",
            runs: vec![(
                "to-passive",
                preset_config(json!({
                    "instance": { "horizon": 20000, "arms": [bern(0.6, 1.0, true), bern(0.5, 1.0, true)] },
                    "profile": [top, passive],
                    "seeds": { "count": 30 },
                    "experiment": { "kind": "deviation", "arm": 0, "alt": passive, "expect": "profitable" },
                })),
            )],
        },
        "thm-F.3-unsustainable" => Preset {
            name: "thm-F.3-unsustainable",
            description: "epsilon-greedy tie-break: a costly arm overshooting on its first pull beats the constant profile",
            runs: vec![(
                "overshoot",
                preset_config(json!({
                    "instance": { "horizon": 20000, "arms": [
                        atoms(0.5, 1.0, true, &[(0.2, 0.5), (0.8, 0.5)], 3.0),
                        atoms(0.5, 0.8, true, &[(0.2, 0.5), (0.8, 0.5)], 1.0),
                    ]},
                    "principal": { "kind": "eps-greedy", "c": 1.0 },
                    "profile": [{ "name": "constant_target", "level": 0.8 }, { "name": "constant_target", "level": 0.8 }],
                    "seeds": { "count": 30 },
                    "experiment": { "kind": "deviation", "arm": 0, "alt": { "name": "first_pull_overshoot", "first": 1.0, "then": 0.8 },
                                    "expect": "profitable" },
                })),
            )],
        },
        _ => return None,
    };
    Some(preset)
}

/// Every registered preset, in registry order.
pub fn registry() -> Vec<Preset> {
    SCENARIOS.iter().map(|n| build_preset(n).expect("registered presets build")).collect()
}

pub fn scenario(name: &str) -> Result<Preset, CliError> {
    build_preset(name).ok_or_else(|| CliError::UnknownScenario {
        name: name.to_string(),
        registry: SCENARIOS.iter().map(|s| s.to_string()).collect(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOptions {
    pub out: Option<PathBuf>,
    pub seeds: Option<usize>,
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub description: String,
    pub pass: bool,
    pub runs: Vec<(String, RunReport)>,
}

/// Runs every configuration of a preset. With `out`, each configuration and
/// its summary are written as `<name>.<label>.config.json` and `<name>.<label>.json`.
pub fn run_scenario(engine: &Engine, name: &str, opts: &ScenarioOptions) -> Result<ScenarioReport, CliError> {
    let preset = scenario(name)?;
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    }
    let mut runs = Vec::with_capacity(preset.runs.len());
    for (label, mut config) in preset.runs {
        if let Some(n) = opts.seeds {
            config.seeds.count = n;
        }
        if let Some(h) = opts.horizon {
            config.set_horizon(h);
        }
        let report = execute(engine, &config)?;
        if let Some(dir) = &opts.out {
            write_json(&dir.join(format!("{}.{label}.config.json", preset.name)), &config)?;
            write_json(&dir.join(format!("{}.{label}.json", preset.name)), &report)?;
        }
        runs.push((label.to_string(), report));
    }
    Ok(ScenarioReport {
        name: preset.name.into(),
        description: preset.description.into(),
        pass: runs.iter().all(|(_, r)| r.pass),
        runs,
    })
}
