//! Distributional checks: expectation inequalities under deviation, the
//! mixture's per-pull independence, and Monte Carlo interval behaviour.

use strat_bandit::engine::{run_episode, seed_range, Engine, MeanCi, Principal};
use strat_bandit::model::{ArmSpec, DistributionSpec, Instance};
use strat_bandit::strategies::StrategySpec;

fn bernoulli(id: usize, mean: f64, cap: f64, honest: bool) -> ArmSpec {
    ArmSpec::bernoulli(id, mean, cap, honest).unwrap()
}

/// `a >= b` unless the difference is significant at roughly three standard errors.
fn not_significantly_below(a: &MeanCi, b: &MeanCi) -> bool {
    let se = ((a.half_width / 1.96).powi(2) + (b.half_width / 1.96).powi(2)).sqrt();
    a.mean >= b.mean - 3.0 * se
}

#[test]
fn top_performance_deviation_shifts_pulls_in_expectation() {
    let inst = Instance::new(
        vec![bernoulli(0, 0.5, 0.9, false), bernoulli(1, 0.6, 1.0, true), bernoulli(2, 0.4, 0.8, true)],
        5000,
    )
    .unwrap();
    let base =
        vec![StrategySpec::ConstantTarget { level: 0.55 }, StrategySpec::HonestPassive, StrategySpec::HonestPassive];
    let mut alt = base.clone();
    alt[0] = StrategySpec::TopPerformance;
    let engine = Engine::new(2);
    let seeds = seed_range(1, 200);
    for principal in [Principal::ucb(), Principal::eps_greedy(1.0)] {
        let b = engine.monte_carlo(&inst, &principal, &base, &seeds).unwrap();
        let a = engine.monte_carlo(&inst, &principal, &alt, &seeds).unwrap();
        // the deviator gains pulls in expectation, everyone else loses
        assert!(not_significantly_below(&a.arms[0].pulls, &b.arms[0].pulls), "{principal:?}");
        for j in 1..3 {
            assert!(not_significantly_below(&b.arms[j].pulls, &a.arms[j].pulls), "{principal:?} arm {j}");
        }
        assert!(a.arms[0].pulls.mean > b.arms[0].pulls.mean);
    }
}

/// Upper 0.1% quantile of a chi-square variable (Wilson-Hilferty).
fn chi2_critical(df: f64) -> f64 {
    let z = 3.09;
    let c = 2.0 / (9.0 * df);
    df * (1.0 - c + z * c.sqrt()).powi(3)
}

/// Pearson statistic of a contingency table and its degrees of freedom.
fn chi2(table: &[Vec<f64>]) -> (f64, f64) {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = rows.iter().sum();
    let mut stat = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &obs) in r.iter().enumerate() {
            let exp = rows[i] * cols[j] / total;
            if exp > 0.0 {
                stat += (obs - exp).powi(2) / exp;
            }
        }
    }
    let live_cols = cols.iter().filter(|&&c| c > 0.0).count();
    (stat, ((table.len() - 1) * (live_cols - 1)) as f64)
}

#[test]
fn mixture_deliveries_are_identical_across_pull_strata_and_independent() {
    let spec =
        ArmSpec::new(0, 0.575, 1.0, true, DistributionSpec::DiscreteFinite { atoms: vec![(0.2, 0.5), (0.95, 0.5)] })
            .unwrap();
    let inst = Instance::new(vec![spec, bernoulli(1, 0.3, 1.0, true)], 60_000).unwrap();
    let profile = vec![StrategySpec::HonestTopMixture { target: Some(0.9) }, StrategySpec::HonestPassive];
    let out = run_episode(&inst, &Principal::ucb(), &profile, 7).unwrap();
    let delivered: Vec<f64> = out.round_log.iter().filter(|e| e.arm == 0).map(|e| e.delivered).collect();
    assert!(delivered.len() > 50_000);
    let mut values: Vec<f64> = delivered.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let category = |x: f64| values.iter().position(|&v| v == x).unwrap();

    let strata = 5;
    let per = delivered.len() / strata;
    let mut table = vec![vec![0.0; values.len()]; strata];
    for (i, &x) in delivered.iter().take(per * strata).enumerate() {
        table[i / per][category(x)] += 1.0;
    }
    let (stat, df) = chi2(&table);
    assert!(stat < chi2_critical(df), "strata chi2 {stat} on {df} df");

    let mut pairs = vec![vec![0.0; values.len()]; values.len()];
    for w in delivered.windows(2) {
        pairs[category(w[0])][category(w[1])] += 1.0;
    }
    let (stat, df) = chi2(&pairs);
    assert!(stat < chi2_critical(df), "lag-1 chi2 {stat} on {df} df");
}

#[test]
fn revenue_interval_covers_the_analytic_mean() {
    let inst = Instance::new(vec![bernoulli(0, 0.6, 1.0, true), bernoulli(1, 0.6, 1.0, true)], 10_000).unwrap();
    let profile = vec![StrategySpec::HonestPassive; 2];
    let s = Engine::new(2).monte_carlo(&inst, &Principal::ucb(), &profile, &seed_range(1, 400)).unwrap();
    let rate = s.revenue_rate;
    assert!((rate.mean - 0.6).abs() <= 3.0 * rate.half_width, "{rate:?}");
    assert!(rate.half_width > 0.0);
}

#[test]
fn doubling_seeds_halves_squared_half_width() {
    let inst = Instance::new(vec![bernoulli(0, 0.6, 1.0, true), bernoulli(1, 0.4, 1.0, true)], 5_000).unwrap();
    let profile = vec![StrategySpec::HonestPassive; 2];
    let engine = Engine::new(2);
    let small = engine.monte_carlo(&inst, &Principal::ucb(), &profile, &seed_range(1, 200)).unwrap();
    let large = engine.monte_carlo(&inst, &Principal::ucb(), &profile, &seed_range(1, 400)).unwrap();
    let ratio = (large.revenue.half_width / small.revenue.half_width).powi(2);
    assert!((ratio - 0.5).abs() <= 0.1, "ratio {ratio}");
}
