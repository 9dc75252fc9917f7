//! Statistical checks of the samplers and of the Monte Carlo estimator.

use govliq::auction::{run_auction_trial, sample_arrivals, sample_noise_beliefs, MarketParams};
use govliq::firm_model::{agency_cost_share, valuation, FirmParams, GovernanceSpec};
use govliq::liquidity::{f_s0, g_s0, mc_estimate_f, mc_z_score, LiquidityQuery, SeriesControl};
use govliq::rng::derive_seed;

const DRAWS: u64 = 40_000;

#[test]
fn arrivals_have_poisson_mean_and_variance() {
    for mean in [0.5, 3.0, 25.0] {
        let market = MarketParams {
            lambda: mean / 2.0,
            delta_t: 2.0,
            ..MarketParams::default()
        };
        let xs: Vec<f64> = (0..DRAWS).map(|t| sample_arrivals(&market, derive_seed(5, t)) as f64).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        // standard errors of the sample mean and variance for a Poisson law
        let se_mean = (mean / n).sqrt();
        let se_var = ((mean + 2.0 * mean * mean) / n).sqrt();
        assert!((m - mean).abs() < 4.0 * se_mean, "mean {m} vs {mean}");
        assert!((v - mean).abs() < 4.0 * se_var, "variance {v} vs {mean}");
    }
}

#[test]
fn noise_beliefs_are_uniform() {
    let (lo, hi) = (2.0, 5.0);
    let xs = sample_noise_beliefs(DRAWS as usize, lo, hi, 17).unwrap();
    assert!(xs.iter().all(|x| (lo..=hi).contains(x)));
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (hi - lo) / 12f64.sqrt();
    assert!((m - 3.5).abs() < 4.0 * sd / n.sqrt());
    // decile counts
    let mut bins = [0u64; 10];
    for x in &xs {
        bins[(((x - lo) / (hi - lo)) * 10.0).min(9.0) as usize] += 1;
    }
    let chi2: f64 = bins
        .iter()
        .map(|&b| {
            let e = n / 10.0;
            (b as f64 - e).powi(2) / e
        })
        .sum();
    // 9 degrees of freedom, 0.999 quantile is 27.88
    assert!(chi2 < 27.88, "chi2 = {chi2}");
}

#[test]
fn fraction_below_threshold_is_g() {
    let firm = FirmParams::default();
    let gov = GovernanceSpec::controlled(0.4, 0.1);
    let val = valuation(&firm, &gov).unwrap();
    let s0 = 0.1;
    let g = g_s0(s0, &gov, agency_cost_share(&gov, &firm)).unwrap();
    let xs = sample_noise_beliefs(DRAWS as usize, val.floor, val.ceiling, 3).unwrap();
    let below = xs.iter().filter(|x| **x < (1.0 - s0) * val.fair).count() as f64 / DRAWS as f64;
    assert!((below - g).abs() < 4.0 * (g * (1.0 - g) / DRAWS as f64).sqrt(), "{below} vs {g}");
}

#[test]
fn monte_carlo_matches_analytic_probability() {
    let firm = FirmParams::default();
    let ctl = SeriesControl::default();
    let cases = [
        (GovernanceSpec::general(0.3, 1.0, 1.0), 0.02, 2.0, 1, 3),
        (GovernanceSpec::general(0.5, 1.0, 0.5), 0.05, 4.0, 2, 4),
        (GovernanceSpec::controlled(0.4, 0.2), 0.1, 1.0, 1, 1),
        (GovernanceSpec::controlled(0.6, 0.1), 0.0, 8.0, 2, 7),
    ];
    for (i, (gov, s0, lambda, n_informed, m_deals)) in cases.into_iter().enumerate() {
        let market = MarketParams {
            lambda,
            delta_t: 1.0,
            n_informed,
            m_deals,
            n_shares_per_deal: 1,
        };
        let q = LiquidityQuery::new(s0).unwrap();
        let f = f_s0(&q, &gov, &firm, &market, &ctl).unwrap().f_value;
        let est = mc_estimate_f(&q, &gov, &firm, &market, 20_000, derive_seed(99, i as u64)).unwrap();
        assert!(mc_z_score(&est, f) < 4.0, "case {i}: analytic {f}, mc {} ± {}", est.estimate, est.std_error);
    }
}

#[test]
fn estimate_is_reproducible_and_pool_independent() {
    let firm = FirmParams::default();
    let gov = GovernanceSpec::general(0.4, 1.0, 0.5);
    let market = MarketParams::default();
    let q = LiquidityQuery::new(0.05).unwrap();
    let a = mc_estimate_f(&q, &gov, &firm, &market, 5_000, 42).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| mc_estimate_f(&q, &gov, &firm, &market, 5_000, 42).unwrap());
    assert_eq!(a, b);
    let c = mc_estimate_f(&q, &gov, &firm, &market, 5_000, 43).unwrap();
    assert_ne!(a.hits, c.hits);
}

#[test]
fn trial_prices_stay_in_belief_range() {
    let firm = FirmParams::default();
    let gov = GovernanceSpec::general(0.5, 1.0, 1.0);
    let val = valuation(&firm, &gov).unwrap();
    let market = MarketParams {
        lambda: 6.0,
        ..MarketParams::default()
    };
    for t in 0..2_000 {
        let out = run_auction_trial(&val, &market, derive_seed(8, t)).unwrap();
        assert!(out.final_price >= val.floor && out.final_price <= val.ceiling);
    }
}
