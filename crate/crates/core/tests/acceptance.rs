//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Runs as a plain binary so every line is printed; exits non-zero if
//! any criterion fails.

use std::time::{Duration, Instant};

use strat_bandit::algorithms::{eps_schedule, PolicyConfig};
use strat_bandit::engine::stats::Verdict;
use strat_bandit::engine::verify::{
    deviation_ratio, estimate_sharp_adaptivity, no_suboptimal_equilibrium, regret_ordinary, revenue_floor_check,
    verify_fata, verify_monotonicity, FataReport,
};
use strat_bandit::engine::{run_episode, seed_range, strategy_moments, Engine, Principal};
use strat_bandit::mechanism::SpPiConfig;
use strat_bandit::model::{ArmSpec, DistributionSpec, Instance, Phase};
use strat_bandit::strategies::{compute_sustainability, Grid, MixtureCase, MixturePlan, StrategySpec};

// Pinned tolerances and sizes.
const TAU: f64 = 0.05;
const SLACK_C: f64 = 4.0;
/// ε-greedy constant used where the default 32 clamps ε to 1 at desk scale.
const DESK_EPS_C: f64 = 1.0;

const AC1_N: u64 = 10_000;
const AC1_SEEDS: usize = 100;
const AC1_LEVEL: f64 = 0.9;
const AC1_BUDGET: Duration = Duration::from_secs(10);

const AC2_N: u64 = 5_000;
const AC2_SEEDS: usize = 200;
const AC2_BUDGET: Duration = Duration::from_secs(30);

const AC4_N: u64 = 100_000;
const AC4_SEEDS: usize = 200;
const AC4_HONEST_MEAN: f64 = 0.6;

const AC5_N: u64 = 100_000;
const AC5_SEEDS: usize = 200;
const AC5_TARGET: f64 = 0.65;
const AC5_ALPHA: f64 = 0.1;

const AC6_LADDER: [u64; 3] = [10_000, 40_000, 160_000];
const AC6_SEEDS: usize = 100;
const AC6_MAX_SPREAD: f64 = 2.0;

const AC7_N: u64 = 100_000;
const AC7_SEEDS: usize = 100;
const AC7_REVENUE_GAP: f64 = 0.02;
const AC7_SHARE_TOL: f64 = 0.05;

const AC8_N: u64 = 100_000;
const AC8_SEEDS: usize = 100;
const AC8_ALPHA: f64 = 0.95;

const AC9_N: u64 = 100_000;
const AC9_SEEDS: usize = 100;
const AC9_REVENUE_GAP: f64 = 0.05;
const AC9_DELIVERY_TOL: f64 = 1e-9;

const AC10_N: u64 = 100_000;
const AC10_SEEDS: usize = 100;

const AC11_PULLS: u64 = 1_000_000;
const AC11_TOL: f64 = 0.002;

const AC12_N: u64 = 100_000;
const AC12_SEEDS: usize = 100;
const AC12_MIN_RATIO: f64 = 1.3;

const AC13_N: u64 = 100_000;
const AC13_SEEDS: usize = 100;
const AC13_MIN_LOWER: f64 = 1.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bernoulli(id: usize, mean: f64, cap: f64, honest: bool) -> ArmSpec {
    ArmSpec::bernoulli(id, mean, cap, honest).unwrap()
}

fn remark_instance(n: u64) -> Instance {
    Instance::new(vec![bernoulli(0, 0.1, 1.0, false), bernoulli(1, 0.1, 0.8, true), bernoulli(2, 0.1, 0.3, true)], n)
        .unwrap()
}

fn ac1(engine: &Engine) -> Outcome {
    let start = Instant::now();
    let inst = Instance::new(vec![bernoulli(0, 0.5, 0.9, true), bernoulli(1, 0.5, 0.9, true)], AC1_N).unwrap();
    let profile = vec![StrategySpec::ConstantTarget { level: AC1_LEVEL }; 2];
    let r = verify_fata(engine, &inst, &PolicyConfig::ucb(), &profile, &[0, 1], &seed_range(1, AC1_SEEDS)).unwrap();
    let elapsed = start.elapsed();
    match r {
        FataReport::Exact { max_discrepancy, violations, .. } => outcome(
            violations == 0 && max_discrepancy <= 1 && elapsed < AC1_BUDGET,
            format!("max |T1(t)-T2(t)| = {max_discrepancy}, violations {violations}, {:.2?}", elapsed),
        ),
        other => outcome(false, format!("unexpected report {other:?}")),
    }
}

fn monotone_instance() -> (Instance, Vec<StrategySpec>) {
    let inst = Instance::new(
        vec![bernoulli(0, 0.5, 0.9, false), bernoulli(1, 0.6, 1.0, true), bernoulli(2, 0.4, 0.8, true)],
        AC2_N,
    )
    .unwrap();
    let profile =
        vec![StrategySpec::ConstantTarget { level: 0.55 }, StrategySpec::HonestPassive, StrategySpec::HonestPassive];
    (inst, profile)
}

fn monotone(engine: &Engine, principal: Principal) -> Outcome {
    let start = Instant::now();
    let (inst, profile) = monotone_instance();
    let r = verify_monotonicity(
        engine,
        &inst,
        &principal,
        &profile,
        |seed| (seed % 3) as usize,
        &StrategySpec::TopPerformance,
        &seed_range(1, AC2_SEEDS),
    )
    .unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.holds && elapsed < AC2_BUDGET,
        format!(
            "{} seeds, subsequence violations {}, count violations {}, {:.2?}",
            r.seeds,
            r.subsequence_violations.len(),
            r.count_violations.len(),
            elapsed
        ),
    )
}

fn ac4(engine: &Engine) -> Outcome {
    let inst = Instance::new(
        vec![bernoulli(0, AC4_HONEST_MEAN, 1.0, true), bernoulli(1, 0.3, 1.0, false), bernoulli(2, 0.5, 0.9, false)],
        AC4_N,
    )
    .unwrap();
    let adversaries = [
        StrategySpec::AbsorbAll,
        StrategySpec::MimicThenAbsorb { level: AC4_HONEST_MEAN + 0.05, switch_after: AC4_N / 4 },
        StrategySpec::ConstantTarget { level: AC4_HONEST_MEAN - 0.1 },
    ];
    let profiles: Vec<Vec<StrategySpec>> =
        adversaries.iter().map(|a| vec![StrategySpec::HonestPassive, a.clone(), a.clone()]).collect();
    let floor = AC4_HONEST_MEAN - SLACK_C * ((AC4_N as f64).ln() / AC4_N as f64).sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, principal) in [("ucb", Principal::ucb()), ("eps-greedy", Principal::eps_greedy(DESK_EPS_C))] {
        let r = revenue_floor_check(engine, &inst, &principal, &profiles, &seed_range(1, AC4_SEEDS), SLACK_C).unwrap();
        assert!((r.floor - floor).abs() < 1e-12);
        pass &= r.holds;
        let rates: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.revenue_rate.mean)).collect();
        parts.push(format!("{name} P/n [{}]", rates.join(", ")));
    }
    outcome(pass, format!("floor {floor:.4}; {}", parts.join("; ")))
}

fn ac5(engine: &Engine) -> Outcome {
    let inst = Instance::new(vec![bernoulli(0, 0.3, 1.0, false), bernoulli(1, 0.6, 1.0, true)], AC5_N).unwrap();
    let profile = vec![StrategySpec::ConstantTarget { level: AC5_TARGET }, StrategySpec::HonestPassive];
    let r = estimate_sharp_adaptivity(
        engine,
        &inst,
        &Principal::ucb(),
        &profile,
        0,
        AC5_ALPHA,
        SLACK_C,
        &seed_range(1, AC5_SEEDS),
    )
    .unwrap();
    let required = (0.6 - 0.3) * r.pulls.mean - SLACK_C * ((AC5_N as f64) * (AC5_N as f64).ln()).sqrt();
    outcome(
        r.active && r.effort.mean >= required,
        format!("T = {:.0}, C = {:.1} >= {:.1}", r.pulls.mean, r.effort.mean, required),
    )
}

fn ac6(engine: &Engine) -> Outcome {
    let mut values = Vec::new();
    for &n in &AC6_LADDER {
        let inst = Instance::new(vec![bernoulli(0, 0.7, 1.0, true), bernoulli(1, 0.4, 1.0, true)], n).unwrap();
        let r =
            regret_ordinary(engine, &inst, &PolicyConfig::eps_greedy(DESK_EPS_C), &seed_range(1, AC6_SEEDS)).unwrap();
        values.push(r.normalized);
    }
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    // informational: the default constant explores on every round at these horizons
    let eps32: Vec<String> = AC6_LADDER.iter().map(|&n| format!("{:.2}", eps_schedule(n, 2, 32.0))).collect();
    outcome(
        min > 0.0 && max / min < AC6_MAX_SPREAD,
        format!(
            "c = {DESK_EPS_C}: normalized regret {:?}, spread {:.3}; c = 32 gives eps [{}]",
            values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            max / min,
            eps32.join(", ")
        ),
    )
}

fn ac7(engine: &Engine) -> Outcome {
    let inst = Instance::new(
        vec![
            bernoulli(0, 0.7, 0.9, false),
            bernoulli(1, 0.7, 0.9, false),
            bernoulli(2, 0.7, 0.9, false),
            bernoulli(3, 0.5, 0.6, true),
        ],
        AC7_N,
    )
    .unwrap();
    let profile = vec![
        StrategySpec::TopPerformance,
        StrategySpec::TopPerformance,
        StrategySpec::TopPerformance,
        StrategySpec::HonestPassive,
    ];
    let seeds = seed_range(1, AC7_SEEDS);
    let base = engine.monte_carlo(&inst, &Principal::ucb(), &profile, &seeds).unwrap();
    let revenue_ok = base.revenue_rate.mean >= 0.9 - AC7_REVENUE_GAP;
    let third = AC7_N as f64 / 3.0;
    let shares_ok = (0..3).all(|i| (base.arms[i].pulls.mean - third).abs() <= AC7_SHARE_TOL * third);
    let mut verdicts_ok = true;
    let mut worst: f64 = 0.0;
    for arm in 0..3 {
        for alt in [StrategySpec::HonestPassive, StrategySpec::ConstantTarget { level: 0.7 }, StrategySpec::AbsorbAll] {
            let r = deviation_ratio(engine, &inst, &Principal::ucb(), &profile, arm, &alt, &seeds, TAU).unwrap();
            verdicts_ok &= r.verdict == Verdict::NotProfitable;
            worst = worst.max(r.ratio.upper);
        }
    }
    outcome(
        revenue_ok && shares_ok && verdicts_ok,
        format!(
            "P/n = {:.4}, T = [{:.0}, {:.0}, {:.0}], all 9 deviations not profitable: {verdicts_ok} (largest ratio upper bound {worst:.4})",
            base.revenue_rate.mean, base.arms[0].pulls.mean, base.arms[1].pulls.mean, base.arms[2].pulls.mean
        ),
    )
}

fn ac8(engine: &Engine) -> Outcome {
    let inst = Instance::new((0..4).map(|i| bernoulli(i, 0.9, 1.0, true)).collect(), AC8_N).unwrap();
    let profile = vec![StrategySpec::HonestPassive; 4];
    let r = no_suboptimal_equilibrium(
        engine,
        &inst,
        &Principal::ucb(),
        &profile,
        AC8_ALPHA,
        &seed_range(1, AC8_SEEDS),
        TAU,
    )
    .unwrap();
    outcome(
        r.condition.holds && r.suboptimal && r.holds && r.deviation.ratio.lower > 1.0,
        format!(
            "condition margin {:.3}, P/n = {:.4}, arm {} to top performance: ratio {:.3} [{:.3}, {:.3}] {:?}",
            r.condition.margin,
            r.revenue_rate.mean,
            r.deviator,
            r.deviation.ratio.ratio,
            r.deviation.ratio.lower,
            r.deviation.ratio.upper,
            r.deviation.verdict
        ),
    )
}

fn ac9(engine: &Engine) -> Outcome {
    let inst = remark_instance(AC9_N);
    let principal = Principal::SpPi(SpPiConfig::default());
    let profile = vec![StrategySpec::SpPiEquilibrium; 3];
    let level = 0.8 + 1.0 / (AC9_N as f64).ln();
    let rows = engine.map_seeds(&seed_range(1, AC9_SEEDS), |seed| {
        let o = run_episode(&inst, &principal, &profile, seed).unwrap();
        let worst = o
            .round_log
            .iter()
            .filter(|e| e.arm == 0 && e.phase == Phase::PiMab)
            .map(|e| (e.delivered - level).abs())
            .fold(0.0, f64::max);
        (o.revenue / AC9_N as f64, o.blocked_arms.len(), worst)
    });
    let rate = rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64;
    let blocks: usize = rows.iter().map(|r| r.1).sum();
    let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let floor = 0.8 - AC9_REVENUE_GAP;
    // informational: the reward phase shrinks relative to n at larger horizons
    let big = remark_instance(1_000_000);
    let big_rate = run_episode(&big, &principal, &profile, 1).unwrap().revenue / 1e6;
    outcome(
        rate >= floor && blocks == 0 && worst <= AC9_DELIVERY_TOL,
        format!(
            "P/n = {rate:.4} (need >= {floor:.2}), blocking events {blocks}, max |delivery - (0.8 + 1/ln n)| = {worst:.1e}; one episode at n = 1e6 gives P/n = {big_rate:.4}"
        ),
    )
}

fn ac10(engine: &Engine) -> Outcome {
    let inst = remark_instance(AC10_N);
    let profile = vec![StrategySpec::SpPiEquilibrium; 3];
    let deviation = StrategySpec::SpPiMisreport { bid: 0.1, level: 0.4 };
    let seeds = seed_range(1, AC10_SEEDS);
    let open = Principal::SpPi(SpPiConfig { blocking: false, ..SpPiConfig::default() });
    let guarded = Principal::SpPi(SpPiConfig::default());
    let without = deviation_ratio(engine, &inst, &open, &profile, 0, &deviation, &seeds, TAU).unwrap();
    let with = deviation_ratio(engine, &inst, &guarded, &profile, 0, &deviation, &seeds, TAU).unwrap();
    let t1 = with.deviation_summary.arms[0].pulls.mean;
    let cap = 2.0 * (AC10_N as f64).ln().powi(4);
    outcome(
        without.verdict == Verdict::Profitable
            && without.ratio.lower > 1.0
            && t1 <= cap
            && with.verdict == Verdict::NotProfitable,
        format!(
            "no blocking: ratio {:.3} [{:.3}, {:.3}] {:?}; blocking: T1 = {t1:.0} <= {cap:.0}, ratio {:.3} {:?}",
            without.ratio.ratio,
            without.ratio.lower,
            without.ratio.upper,
            without.verdict,
            with.ratio.ratio,
            with.verdict
        ),
    )
}

fn ac11() -> Outcome {
    let spec =
        ArmSpec::new(0, 0.575, 1.0, true, DistributionSpec::DiscreteFinite { atoms: vec![(0.2, 0.5), (0.95, 0.5)] })
            .unwrap();
    let plan = MixturePlan::new(&spec, 0.9).unwrap();
    // oracle: case 2 probability by hand, (0.9 - 0.5 * 1.0 - 0.5 * 0.2) / (0.5 * (0.9 - 0.2)) = 6/7
    let p_oracle = 6.0 / 7.0;
    let mut brute = 0.0;
    for (raw, q) in [(0.2, 0.5), (0.95, 0.5)] {
        for (coin, w) in [(0.0, p_oracle), (1.0, 1.0 - p_oracle)] {
            brute += q * w * (raw + plan.effort(raw, coin));
        }
    }
    let inst = Instance::new(vec![spec.clone(), bernoulli(1, 0.5, 1.0, true)], 1_000).unwrap();
    let m = strategy_moments(&inst, 0, &StrategySpec::HonestTopMixture { target: Some(0.9) }, AC11_PULLS, 1).unwrap();
    outcome(
        plan.case == MixtureCase::LiftLow
            && (plan.p - p_oracle).abs() < 1e-12
            && (brute - 0.9).abs() < 1e-12
            && (m.delivered_mean - 0.9).abs() <= AC11_TOL
            && m.effort_min >= 0.0
            && m.violations == 0,
        format!(
            "p = {:.6}, exact mean {brute:.12}, empirical mean {:.5} over {} pulls, min effort {:.3}",
            plan.p, m.delivered_mean, m.pulls, m.effort_min
        ),
    )
}

fn ac12(engine: &Engine) -> Outcome {
    let inst = Instance::new(vec![bernoulli(0, 0.6, 1.0, true), bernoulli(1, 0.5, 1.0, true)], AC12_N).unwrap();
    let profile = vec![StrategySpec::TopPerformance, StrategySpec::HonestPassive];
    let r = deviation_ratio(
        engine,
        &inst,
        &Principal::ucb(),
        &profile,
        0,
        &StrategySpec::HonestPassive,
        &seed_range(1, AC12_SEEDS),
        TAU,
    )
    .unwrap();
    outcome(
        r.ratio.ratio >= AC12_MIN_RATIO && r.verdict == Verdict::Profitable,
        format!(
            "u1(passive)/u1(top) = {:.4} [{:.4}, {:.4}], limit 1/0.6 = {:.4}",
            r.ratio.ratio,
            r.ratio.lower,
            r.ratio.upper,
            1.0 / 0.6
        ),
    )
}

fn ac13(engine: &Engine) -> Outcome {
    let atoms = DistributionSpec::DiscreteFinite { atoms: vec![(0.2, 0.5), (0.8, 0.5)] };
    let arm0 = ArmSpec::new(0, 0.5, 1.0, true, atoms.clone()).unwrap().with_cost(3.0).unwrap();
    let arm1 = ArmSpec::new(1, 0.5, 0.8, true, atoms).unwrap();
    let grid = Grid::default();
    let s0 = compute_sustainability(&arm0, &grid).unwrap();
    let s1 = compute_sustainability(&arm1, &grid).unwrap();
    let setup_ok = !s0.sustainable && (s0.m_f - 0.8).abs() < 1e-12 && s1.sustainable && (s1.m_f - 0.8).abs() < 1e-12;
    let inst = Instance::new(vec![arm0, arm1], AC13_N).unwrap();
    let profile = vec![StrategySpec::ConstantTarget { level: 0.8 }; 2];
    let deviation = StrategySpec::FirstPullOvershoot { first: 1.0, then: 0.8 };
    let seeds = seed_range(1, AC13_SEEDS);
    let r = deviation_ratio(engine, &inst, &Principal::eps_greedy(DESK_EPS_C), &profile, 0, &deviation, &seeds, TAU)
        .unwrap();
    outcome(
        setup_ok && r.verdict == Verdict::Profitable && r.ratio.lower > AC13_MIN_LOWER,
        format!(
            "M1^f = {}, M2^f = {}, c = {DESK_EPS_C} (eps {:.4}): ratio {:.4} [{:.4}, {:.4}] {:?}",
            s0.m_f,
            s1.m_f,
            eps_schedule(AC13_N, 2, DESK_EPS_C),
            r.ratio.ratio,
            r.ratio.lower,
            r.ratio.upper,
            r.verdict
        ),
    )
}

fn ac14() -> Outcome {
    let (inst, profile) = monotone_instance();
    let seeds = seed_range(1, 64);
    let run = |workers: usize| {
        let engine = Engine::new(workers);
        let mut out = String::new();
        for principal in [Principal::ucb(), Principal::eps_greedy(DESK_EPS_C)] {
            let s = engine.monte_carlo(&inst, &principal, &profile, &seeds).unwrap();
            out.push_str(&serde_json::to_string_pretty(&s).unwrap());
        }
        let sp = remark_instance(AC9_N);
        let s = engine
            .monte_carlo(
                &sp,
                &Principal::SpPi(SpPiConfig::default()),
                &vec![StrategySpec::SpPiEquilibrium; 3],
                &seed_range(1, 8),
            )
            .unwrap();
        out.push_str(&serde_json::to_string_pretty(&s).unwrap());
        out
    };
    let one = run(1);
    let eight = run(8);
    outcome(
        one == eight,
        format!("{} bytes of summary JSON, identical at 1 and 8 workers: {}", one.len(), one == eight),
    )
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes this suite skips it
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let engine = Engine::from_env();
    let criteria: Vec<(&str, Check)> = vec![
        ("1 UCB FATA exactness", Box::new(|| ac1(&engine))),
        ("2 UCB path-wise monotonicity", Box::new(|| monotone(&engine, Principal::ucb()))),
        ("3 eps-greedy path-wise monotonicity", Box::new(|| monotone(&engine, Principal::eps_greedy(DESK_EPS_C)))),
        ("4 robust revenue floor", Box::new(|| ac4(&engine))),
        ("5 sharp adaptivity", Box::new(|| ac5(&engine))),
        ("6 eps-greedy regret scaling", Box::new(|| ac6(&engine))),
        ("7 top-performance equilibrium", Box::new(|| ac7(&engine))),
        ("8 no sub-optimal revenue equilibrium", Box::new(|| ac8(&engine))),
        ("9 SP+PI equilibrium revenue", Box::new(|| ac9(&engine))),
        ("10 blocking necessity", Box::new(|| ac10(&engine))),
        ("11 honest top-arm mixture", Box::new(ac11)),
        ("12 top performance not dominant", Box::new(|| ac12(&engine))),
        ("13 unsustainable-arm counterexample", Box::new(|| ac13(&engine))),
        ("14 determinism across worker counts", Box::new(ac14)),
    ];
    let mut failed = Vec::new();
    for (name, check) in &criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.1?})", o.detail, start.elapsed());
        if !o.pass {
            failed.push(*name);
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
