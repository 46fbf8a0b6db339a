mod common;

use proptest::prelude::*;

use longevity_core::hedge::{
    portfolio_liability, run_experiment, summary_stats, ExperimentResult, HedgeConfig, Portfolio,
    SurplusSample,
};
use longevity_core::price::{annuity_price, cap_price, Strip, ValuationContext};
use longevity_core::{Execution, MarketParams, ModelParams};

fn base_params() -> ModelParams {
    ModelParams::australian_males_2008()
}

fn experiment(n: u32, t_hat: u32, lambda: f64, num_sims: usize, seed: u64) -> ExperimentResult {
    let config = HedgeConfig {
        n,
        t_hat,
        lambda,
        num_sims,
        seed,
        ..HedgeConfig::base_case()
    };
    run_experiment(
        &config,
        &base_params(),
        &MarketParams::default(),
        Execution::default(),
    )
    .unwrap()
}

fn std_tolerance(std: f64, num_sims: usize) -> f64 {
    4.0 * std / (2.0 * num_sims as f64).sqrt()
}

#[test]
fn surplus_std_matches_analytic_oracle() {
    let p = base_params();
    let r = MarketParams::default().r;
    let sims = 3000;
    for (n, t_hat) in [(1000, 30), (4000, 20)] {
        let res = experiment(n, t_hat, 8.5, sims, 41);
        for (portfolio, hedged_to) in [(Portfolio::Unhedged, 0), (Portfolio::SwapHedged, t_hat)] {
            let mc = res.report(portfolio).unwrap().std_dev;
            let exact = common::swap_hedged_std(&p, 65, r, 45, hedged_to, n);
            assert!(
                (mc - exact).abs() < std_tolerance(exact, sims),
                "n={n} T_hat={t_hat} {}: {mc} vs {exact}",
                portfolio.name()
            );
        }
    }
}

#[test]
fn swap_payoff_is_fair_without_risk_premium() {
    let res = experiment(500, 30, 0.0, 3000, 3);
    let f: Vec<f64> = res
        .samples()
        .map(|s| s.f_swap / res.instruments.n)
        .collect();
    let (mean, se) = common::mean_and_se(&f);
    assert!(mean.abs() < 4.0 * se, "{mean} +/- {se}");

    let priced = experiment(500, 30, 8.5, 3000, 3);
    let f: Vec<f64> = priced
        .samples()
        .map(|s| s.f_swap / priced.instruments.n)
        .collect();
    let (mean, se) = common::mean_and_se(&f);
    assert!(mean + 4.0 * se < 0.0, "{mean} +/- {se}");
}

#[test]
fn cap_premium_prices_the_cap_payoff() {
    let p = base_params();
    let m = MarketParams::default().with_lambda(0.0);
    let res = experiment(500, 30, 0.0, 3000, 9);
    let ctx = ValuationContext::inception(&p, &m, 65).unwrap();
    let unit = cap_price(&Strip::at_best_estimate(65, 30, 1.0, &p).unwrap(), &ctx).unwrap();
    assert!((res.instruments.cap_premium / res.instruments.n - unit).abs() < 1e-12);
    let payoff: Vec<f64> = res.samples().map(|s| s.f_cap / res.instruments.n).collect();
    let (mean, se) = common::mean_and_se(&payoff);
    assert!((mean - unit).abs() < 4.0 * se, "{mean} +/- {se} vs {unit}");
}

#[test]
fn swap_hedge_beats_cap_hedge() {
    let res = experiment(4000, 30, 8.5, 2000, 2008);
    let swap = res.risk_reduction(Portfolio::SwapHedged).unwrap();
    let cap = res.risk_reduction(Portfolio::CapHedged).unwrap();
    assert!(swap > cap && cap > 0.0, "swap {swap} cap {cap}");
}

#[test]
fn skewness_signs() {
    let res = experiment(4000, 30, 8.5, 2000, 2008);
    let unhedged = res.report(Portfolio::Unhedged).unwrap().skewness;
    let cap = res.report(Portfolio::CapHedged).unwrap().skewness;
    assert!(unhedged < 0.0, "{unhedged}");
    assert!(cap > 0.0, "{cap}");
}

#[test]
fn dispersion_does_not_depend_on_lambda() {
    let a = experiment(800, 30, 0.0, 400, 12);
    let b = experiment(800, 30, 12.5, 400, 12);
    for p in Portfolio::ALL {
        let (ra, rb) = (a.report(p).unwrap(), b.report(p).unwrap());
        assert_eq!(ra.std_dev.to_bits(), rb.std_dev.to_bits(), "{}", p.name());
        assert_eq!(ra.skewness.to_bits(), rb.skewness.to_bits(), "{}", p.name());
    }
    let ua = a.report(Portfolio::Unhedged).unwrap().mean;
    let ub = b.report(Portfolio::Unhedged).unwrap().mean;
    assert!(ub > ua);
}

#[test]
fn experiment_is_reproducible_across_execution_modes() {
    let config = HedgeConfig {
        n: 300,
        num_sims: 64,
        ..HedgeConfig::base_case()
    };
    let p = base_params();
    let m = MarketParams::default();
    let seq = run_experiment(&config, &p, &m, Execution::Sequential).unwrap();
    let par = run_experiment(&config, &p, &m, Execution::Parallel).unwrap();
    assert_eq!(seq.draws, par.draws);
}

#[test]
fn deterministic_mortality_risk_diversifies() {
    let p = base_params().deterministic();
    let m = MarketParams::default();
    let run = |n| {
        let config = HedgeConfig {
            n,
            num_sims: 3000,
            seed: 77,
            ..HedgeConfig::base_case()
        };
        run_experiment(&config, &p, &m, Execution::default())
            .unwrap()
            .report(Portfolio::Unhedged)
            .unwrap()
            .std_dev
    };
    let ratio = run(100) / run(400);
    assert!((ratio - 2.0).abs() < 0.15, "{ratio}");
}

#[test]
fn premium_equals_annuity_value() {
    let res = experiment(250, 30, 8.5, 10, 1);
    let m = MarketParams::default();
    let unit = annuity_price(65, &base_params(), &m).unwrap();
    assert!((res.instruments.premium - 250.0 * unit).abs() < 1e-9);
    assert_eq!(portfolio_liability(&[], &m), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn surplus_identities(a in 0.0f64..1e5, l in 0.0f64..1e5, fs in -1e3f64..1e3, fc in 0.0f64..1e3, cc in 0.0f64..1e3) {
        let s = SurplusSample::new(a, l, fs, fc, cc);
        prop_assert_eq!(s.d_no, a - l);
        prop_assert_eq!(s.d_swap, a - l + fs);
        prop_assert_eq!(s.d_cap, a - l + fc - cc);
    }

    #[test]
    fn tail_statistics_are_ordered(xs in prop::collection::vec(-10.0f64..10.0, 2..400), q in 0.001f64..0.5) {
        let r = summary_stats(&xs, q).unwrap();
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(r.es_q <= r.var_q + 1e-12);
        prop_assert!(r.es_q >= min - 1e-12);
        prop_assert!(r.var_q <= r.mean + r.std_dev * (xs.len() as f64).sqrt() + 1e-9);
        prop_assert!(r.tail_count >= 1);
        let rank = ((q * xs.len() as f64).ceil() as usize).max(1);
        prop_assert!(r.tail_count >= rank);
    }

    #[test]
    fn shifting_moves_location_only(xs in prop::collection::vec(-10.0f64..10.0, 3..200), c in -100.0f64..100.0) {
        let base = summary_stats(&xs, 0.05).unwrap();
        let moved: Vec<f64> = xs.iter().map(|v| v + c).collect();
        let shifted = summary_stats(&moved, 0.05).unwrap();
        prop_assert!((shifted.mean - base.mean - c).abs() < 1e-9);
        prop_assert!((shifted.std_dev - base.std_dev).abs() < 1e-8 * (1.0 + base.std_dev));
        let analytic = base.clone().shifted(c);
        prop_assert!((analytic.var_q - shifted.var_q).abs() < 1e-9);
        prop_assert_eq!(analytic.std_dev, base.std_dev);
    }
}

#[test]
fn single_sample_reports_warning() {
    let r = summary_stats(&[1.5], 0.01).unwrap();
    assert!(r.std_dev.is_nan());
    assert_eq!(r.var_q, 1.5);
    assert!(r.warning.unwrap().contains("tail estimates unreliable"));
    let flat = summary_stats(&[2.0; 50], 0.01).unwrap();
    assert_eq!(flat.std_dev, 0.0);
    assert_eq!(flat.skewness, 0.0);
}
