//! Liquidity analytics: the threshold probability `g_{s0}`, the kernel `K`,
//! the discount probability `F_{s0}` with its index `ILL = -ln F`, a Monte
//! Carlo estimator of `F` built on the auction, and the synergy quantities.

pub mod kernel;
pub mod synergy;

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use crate::auction::{run_auction_trial, MarketParams};
use crate::error::{Error, Result};
use crate::firm_model::{agency_cost_share, s_bar, valuation, FirmKind, FirmParams, GovernanceSpec};
use crate::rng::derive_seed;

pub use kernel::{
    d2k_dg_dl, dk_dg, dk_dl, k_closed_form, k_series, kernel_parts, ln_factorial, synergy_kernel, KernelValue,
    SeriesControl,
};
pub use synergy::{cross_partial_signs, delta_cm_ill, delta_lambda_ill, Derivative, FdSteps, Sign, SignReport};

/// Discount-rate threshold `s0` in [0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiquidityQuery {
    pub s0: f64,
}

impl LiquidityQuery {
    pub fn new(s0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&s0) {
            return Err(Error::invalid("s0", format!("{s0} outside [0, 1)")));
        }
        Ok(Self { s0 })
    }
}

/// Liquidity index `-ln F`, saturating at `+inf` when `F = 0`.
///
/// Infinite values compare above every finite one and print as `inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ill(f64);

impl Ill {
    pub const INFINITE: Ill = Ill(f64::INFINITY);

    pub fn from_ln_probability(ln_f: f64) -> Self {
        if ln_f == f64::NEG_INFINITY {
            Ill::INFINITE
        } else {
            // -0.0 for F = 1 would print as "-0"
            Ill((-ln_f).max(0.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl PartialOrd for Ill {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for Ill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiquidityPoint {
    pub s0: f64,
    pub f_value: f64,
    pub ill_value: Ill,
}

/// Probability that one noise estimate falls below `(1 - s0) V(rho)`:
/// `1 - (rho + s0 - s0 rho) / c_m` for `s0 < s_bar`, zero otherwise.
pub fn g_s0(s0: f64, gov: &GovernanceSpec, rho: f64) -> Result<f64> {
    if gov.c_m == 0.0 || s0 >= s_bar(gov, rho) {
        return Ok(0.0);
    }
    let g = 1.0 - (rho + s0 - s0 * rho) / gov.c_m;
    // tolerate rounding at the s_bar boundary only
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&g) || g.is_nan() {
        return Err(Error::Consistency(format!(
            "g = {g} outside [0, 1] for s0 = {s0}, rho = {rho}, c_m = {}",
            gov.c_m
        )));
    }
    Ok(g.clamp(0.0, 1.0))
}

/// `G(c_m) = rho(c_m) - c_m rho'(c_m)` for a general-type firm at an interior optimum.
pub fn governance_gap(gov: &GovernanceSpec, firm: &FirmParams) -> Result<f64> {
    let FirmKind::General(f) = gov.kind else {
        return Err(Error::domain("governance gap is defined for general-type firms only"));
    };
    let rho = agency_cost_share(gov, firm);
    if rho >= gov.c_m {
        // clamped: rho = c_m, rho' = 1
        return Ok(0.0);
    }
    let slope = 0.5 * (1.0 - firm.theta) * f.kappa * f.beta * gov.c_m.powf(f.beta - 1.0);
    Ok(rho - gov.c_m * slope)
}

/// Analytic `dg_{s0}/dc_m` at a point with `s0 < s_bar`.
pub fn dg_dcm(s0: f64, gov: &GovernanceSpec, firm: &FirmParams) -> Result<f64> {
    let c = gov.c_m;
    let numer = match gov.kind {
        FirmKind::General(_) => (1.0 - s0) * governance_gap(gov, firm)? + s0,
        FirmKind::Controlled { rho0 } => rho0 + s0 - s0 * rho0,
    };
    Ok(numer / (c * c))
}

fn check_inputs(query: &LiquidityQuery, gov: &GovernanceSpec, firm: &FirmParams, market: &MarketParams) -> Result<()> {
    let mut errs = firm.check("firm.");
    errs.extend(gov.check("governance."));
    errs.extend(
        market
            .check("market.")
            .into_iter()
            // M < N_I is admissible here: it is the light-selling-pressure case.
            .filter(|e| !e.reason.contains("M >= N_I")),
    );
    if !(0.0..1.0).contains(&query.s0) {
        errs.push(crate::error::FieldError::new("s0", "must lie in [0, 1)"));
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errs))
    }
}

/// Probability that the post-sale discount rate exceeds `s0`, and `ILL = -ln F`.
///
/// Depends on time only through `delta_t`. With fewer deals than informed
/// traders the price never falls below fair value and `F = 0`.
pub fn f_s0(
    query: &LiquidityQuery,
    gov: &GovernanceSpec,
    firm: &FirmParams,
    market: &MarketParams,
    _ctl: &SeriesControl,
) -> Result<LiquidityPoint> {
    check_inputs(query, gov, firm, market)?;
    let rho = agency_cost_share(gov, firm);
    let zero = LiquidityPoint {
        s0: query.s0,
        f_value: 0.0,
        ill_value: Ill::INFINITE,
    };
    if market.m_deals < market.n_informed || query.s0 >= s_bar(gov, rho) {
        return Ok(zero);
    }
    let g = g_s0(query.s0, gov, rho)?;
    let k = kernel_parts(g, market.mean_arrivals(), market.surplus_deals() as u64)?;
    Ok(LiquidityPoint {
        s0: query.s0,
        f_value: k.value,
        ill_value: Ill::from_ln_probability(k.ln_value),
    })
}

/// Monte Carlo estimate of `F` with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub trials: u64,
}

/// Fraction of simulated auctions whose final price lies below `(1 - s0) V(rho)`.
///
/// Trial `t` draws from a generator seeded by `derive_seed(rng_seed, t)`, so the
/// estimate is identical for any number of workers in the current rayon pool.
pub fn mc_estimate_f(
    query: &LiquidityQuery,
    gov: &GovernanceSpec,
    firm: &FirmParams,
    market: &MarketParams,
    trials: u64,
    rng_seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    check_inputs(query, gov, firm, market)?;
    let val = valuation(firm, gov)?;
    let threshold = (1.0 - query.s0) * val.fair;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            run_auction_trial(&val, market, derive_seed(rng_seed, t)).map(|o| u64::from(o.final_price < threshold))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = hits as f64 / trials as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        hits,
        trials,
    })
}

/// Standard error of a binomial proportion `p` over `trials` draws.
pub fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// `|estimate - analytic|` in units of the binomial standard error at the
/// analytic probability. Exact agreement is required when that error is zero.
pub fn mc_z_score(estimate: &McEstimate, analytic: f64) -> f64 {
    let diff = (estimate.estimate - analytic).abs();
    let se = binomial_se(analytic, estimate.trials);
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn firm() -> FirmParams {
        FirmParams::default()
    }

    #[test]
    fn g_hand_value_and_zero_region() {
        let gov = GovernanceSpec::general(0.4, 1.0, 1.0);
        assert_relative_eq!(g_s0(0.0, &gov, 0.1).unwrap(), 0.75, max_relative = 1e-15);
        // s_bar = 1/3
        assert_eq!(g_s0(0.34, &gov, 0.1).unwrap(), 0.0);
        assert_eq!(g_s0(1.0 / 3.0, &gov, 0.1).unwrap(), 0.0);
        for s0 in [0.0, 0.2, 0.9] {
            assert_eq!(g_s0(s0, &gov, 0.4).unwrap(), 0.0);
        }
        assert_eq!(g_s0(0.0, &GovernanceSpec::general(0.0, 1.0, 1.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn g_flags_violated_preconditions() {
        // rho above c_m makes s_bar negative-free but g > 1 impossible; use negative rho
        let gov = GovernanceSpec::general(0.4, 1.0, 1.0);
        assert!(matches!(g_s0(0.0, &gov, -0.5), Err(Error::Consistency(_))));
    }

    #[test]
    fn zero_rate_gives_certain_discount() {
        let gov = GovernanceSpec::general(0.4, 1.0, 1.0);
        let market = MarketParams {
            lambda: 0.0,
            ..MarketParams::default()
        };
        let p = f_s0(&LiquidityQuery::new(0.05).unwrap(), &gov, &firm(), &market, &SeriesControl::default()).unwrap();
        assert_eq!(p.f_value, 1.0);
        assert_eq!(p.ill_value.value(), 0.0);
        assert_eq!(p.ill_value.to_string(), "0");
    }

    #[test]
    fn beyond_s_bar_is_infinitely_liquid() {
        let gov = GovernanceSpec::general(0.4, 1.0, 1.0);
        // theta = 0.4: rho = 0.12, s_bar = 0.28/0.88
        let p = f_s0(&LiquidityQuery::new(0.5).unwrap(), &gov, &firm(), &MarketParams::default(), &SeriesControl::default())
            .unwrap();
        assert_eq!(p.f_value, 0.0);
        assert!(p.ill_value.is_infinite());
        assert_eq!(p.ill_value.to_string(), "inf");
        assert!(p.ill_value > Ill::from_ln_probability(-1e300));
    }

    #[test]
    fn light_selling_pressure_never_discounts() {
        let gov = GovernanceSpec::general(0.4, 1.0, 1.0);
        let market = MarketParams {
            n_informed: 4,
            m_deals: 2,
            ..MarketParams::default()
        };
        let p = f_s0(&LiquidityQuery::new(0.0).unwrap(), &gov, &firm(), &market, &SeriesControl::default()).unwrap();
        assert_eq!(p.f_value, 0.0);
    }

    #[test]
    fn f_matches_kernel() {
        let gov = GovernanceSpec::controlled(0.5, 0.2);
        let market = MarketParams {
            lambda: 2.5,
            delta_t: 1.2,
            n_informed: 1,
            m_deals: 3,
            n_shares_per_deal: 1,
        };
        let q = LiquidityQuery::new(0.1).unwrap();
        let p = f_s0(&q, &gov, &firm(), &market, &SeriesControl::default()).unwrap();
        let g = 1.0 - (0.2 + 0.1 - 0.1 * 0.2) / 0.5;
        let k = k_closed_form(g, 3.0, 2).unwrap();
        assert_relative_eq!(p.f_value, k, max_relative = 1e-14);
        assert_relative_eq!(p.ill_value.value(), -k.ln(), max_relative = 1e-12);
    }

    #[test]
    fn only_delta_t_matters() {
        let gov = GovernanceSpec::general(0.3, 1.0, 0.5);
        let q = LiquidityQuery::new(0.02).unwrap();
        let a = f_s0(&q, &gov, &FirmParams { t_eval: 1.0, ..firm() }, &MarketParams::default(), &SeriesControl::default());
        let b = f_s0(&q, &gov, &FirmParams { t_eval: 9.0, w_t: 1.3, ..firm() }, &MarketParams::default(), &SeriesControl::default());
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn mc_degenerate_cases_are_exact() {
        let q = LiquidityQuery::new(0.05).unwrap();
        let zero_rate = MarketParams {
            lambda: 0.0,
            ..MarketParams::default()
        };
        let gov = GovernanceSpec::general(0.4, 1.0, 1.0);
        let e = mc_estimate_f(&q, &gov, &firm(), &zero_rate, 500, 3).unwrap();
        assert_eq!(e.estimate, 1.0);
        let flat = GovernanceSpec::general(0.0, 1.0, 1.0);
        let e = mc_estimate_f(&LiquidityQuery::new(0.0).unwrap(), &flat, &firm(), &MarketParams::default(), 500, 3).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert!(mc_estimate_f(&q, &gov, &firm(), &zero_rate, 0, 3).is_err());
    }

    #[test]
    fn gap_and_slope_of_g() {
        let f = firm();
        let linear = GovernanceSpec::general(0.3, 1.0, 1.0);
        assert!(governance_gap(&linear, &f).unwrap().abs() < 1e-15);
        let concave = GovernanceSpec::general(0.3, 1.0, 0.5);
        assert!(governance_gap(&concave, &f).unwrap() > 0.0);

        for gov in [concave, GovernanceSpec::controlled(0.3, 0.1)] {
            let s0 = 0.05;
            let g = |c: f64| {
                let gv = gov.with_c_m(c);
                g_s0(s0, &gv, agency_cost_share(&gv, &f)).unwrap()
            };
            let h = 1e-6;
            let fd = (g(0.3 + h) - g(0.3 - h)) / (2.0 * h);
            assert_relative_eq!(dg_dcm(s0, &gov, &f).unwrap(), fd, max_relative = 1e-6);
            assert!(fd > 0.0);
        }
    }

    #[test]
    fn z_score_handles_degenerate_probabilities() {
        let e = McEstimate {
            estimate: 1.0,
            std_error: 0.0,
            hits: 10,
            trials: 10,
        };
        assert_eq!(mc_z_score(&e, 1.0), 0.0);
        assert!(mc_z_score(&e, 0.0).is_infinite());
    }
}
