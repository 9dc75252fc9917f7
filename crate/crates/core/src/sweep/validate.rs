//! One-shot invariant suite at the configured parameters, with a
//! machine-readable `key=value` summary line per check.

use std::fmt::Write as _;

use crate::auction::{
    brute_force_equilibrium_check, check_deal_schedule, sample_arrivals, sample_noise_beliefs, simulate_deals,
    BeliefProfile, MarketParams, ORACLE_MAX_DEALS, ORACLE_MAX_TRADERS,
};
use crate::error::Result;
use crate::firm_model::{agency_cost_share, s_bar, valuation};
use crate::liquidity::{dk_dg, dk_dl, k_series, kernel_parts, synergy_kernel, KernelValue};
use crate::rng::derive_seed;

use super::config::RunConfig;
use super::table::{simulated_rows, MC_FLAG_SE};

/// Relative tolerance between analytic and finite-difference kernel partials.
pub const DERIVATIVE_REL_TOL: f64 = 1e-6;
/// Random auctions drawn per `(firm kind, c_m, lambda)` point.
const AUCTIONS_PER_POINT: u64 = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Harness self-test: flips the sign of the analytic `dK/dL`.
    pub flip_dk_dl_sign: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "check={} status={} cases={} failures={} {}",
                c.name,
                if c.passed() { "PASS" } else { "FAIL" },
                c.cases,
                c.failures,
                c.detail
            );
        }
        let passed = self.checks.iter().filter(|c| c.passed()).count();
        let _ = writeln!(
            out,
            "summary status={} passed={} failed={}",
            if self.passed() { "PASS" } else { "FAIL" },
            passed,
            self.checks.len() - passed
        );
        out
    }
}

/// Kernel arguments `(g, L, m)` at every grid point with `s0 < s_bar`.
fn kernel_points(cfg: &RunConfig) -> Result<Vec<(f64, f64, u64)>> {
    let m = cfg.market.surplus_deals() as u64;
    let mut pts = Vec::new();
    for kind in &cfg.kinds {
        for &c in &cfg.c_m {
            let gov = kind.at(c);
            let rho = agency_cost_share(&gov, &cfg.firm);
            let sb = s_bar(&gov, rho);
            for &lam in &cfg.lambda {
                for &q in cfg.queries.values() {
                    let s0 = cfg.queries.resolve(q, sb);
                    if s0 < sb {
                        let g = crate::liquidity::g_s0(s0, &gov, rho)?;
                        pts.push((g, cfg.market.with_lambda(lam).mean_arrivals(), m));
                    }
                }
            }
        }
    }
    Ok(pts)
}

fn series_check(cfg: &RunConfig, pts: &[(f64, f64, u64)]) -> Result<CheckResult> {
    let tol = 10.0 * cfg.series.tail_tol;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for &(g, l, m) in pts {
        match k_series(g, l, m, &cfg.series) {
            Ok(s) => {
                let err = (s - kernel_parts(g, l, m)?.value).abs();
                worst = worst.max(err);
                failures += usize::from(!(err < tol));
            }
            Err(_) => failures += 1,
        }
    }
    Ok(CheckResult {
        name: "series_vs_closed_form",
        cases: pts.len(),
        failures,
        detail: format!("max_abs_err={worst:e} tol={tol:e}"),
    })
}

/// The smaller of `K` and `1 - K`, with the sign mapping it back to `K`.
fn accurate_part(k: &KernelValue, use_complement: bool) -> f64 {
    if use_complement {
        -k.complement
    } else {
        k.value
    }
}

/// Derivative of `x -> h(x)` by central difference, or a second-order
/// one-sided stencil when `x +- h` leaves `[lo, hi]`.
fn fd<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64, lo: f64, hi: f64) -> Result<f64> {
    if x - h >= lo && x + h <= hi {
        Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
    } else if x + 2.0 * h <= hi {
        Ok((-3.0 * f(x)? + 4.0 * f(x + h)? - f(x + 2.0 * h)?) / (2.0 * h))
    } else {
        Ok((3.0 * f(x)? - 4.0 * f(x - h)? + f(x - 2.0 * h)?) / (2.0 * h))
    }
}

/// Finite-difference `(dK/dL, dK/dg)`, differencing whichever of `K`, `1 - K`
/// is small so that neither suffers cancellation.
pub fn fd_kernel_partials(g: f64, l: f64, m: u64) -> Result<(f64, f64)> {
    let centre = kernel_parts(g, l, m)?;
    let comp = centre.value > 0.5;
    let part = |g: f64, l: f64| -> Result<f64> { Ok(accurate_part(&kernel_parts(g, l, m)?, comp)) };
    let hl = 1e-6 * l.max(1.0);
    let hg = 1e-6;
    let d_l = fd(|x| part(g, x), l, hl, 0.0, f64::INFINITY)?;
    let d_g = fd(|x| part(x, l), g, hg, 0.0, 1.0)?;
    Ok((d_l, d_g))
}

fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn derivative_check(pts: &[(f64, f64, u64)], opts: ValidateOptions) -> Result<CheckResult> {
    let mut failures = 0;
    let mut cases = 0;
    let mut worst = 0.0f64;
    for &(g, l, m) in pts {
        if !(g < 1.0 && l > 0.0) {
            continue;
        }
        cases += 1;
        let sign = if opts.flip_dk_dl_sign { -1.0 } else { 1.0 };
        let (fd_l, fd_g) = fd_kernel_partials(g, l, m)?;
        let e = relative_error(sign * dk_dl(g, l, m)?, fd_l).max(relative_error(dk_dg(g, l, m)?, fd_g));
        worst = worst.max(e);
        failures += usize::from(!(e < DERIVATIVE_REL_TOL));
    }
    Ok(CheckResult {
        name: "derivatives_vs_finite_difference",
        cases,
        failures,
        detail: format!("max_rel_err={worst:e} tol={DERIVATIVE_REL_TOL:e}"),
    })
}

fn kernel_inequality_check(pts: &[(f64, f64, u64)]) -> Result<CheckResult> {
    let mut failures = 0;
    let mut cases = 0;
    for &(g, l, m) in pts {
        if !(g < 1.0 && l > 0.0) {
            continue;
        }
        cases += 1;
        failures += usize::from(!(synergy_kernel(g, l, m)? > 0.0));
    }
    Ok(CheckResult {
        name: "kernel_inequality",
        cases,
        failures,
        detail: String::new(),
    })
}

/// A schedule with one deal priced below the next-highest estimate; the
/// oracle must report it.
fn oracle_self_test() -> Result<bool> {
    let beliefs = BeliefProfile {
        informed_value: 10.0,
        noise_estimates: vec![9.0, 8.0, 7.0],
        floor: 5.0,
        ceiling: 10.0,
    };
    let market = MarketParams {
        n_informed: 1,
        m_deals: 2,
        ..MarketParams::default()
    };
    let mut schedule = simulate_deals(&beliefs, &market);
    schedule[1].price = 7.5;
    Ok(!check_deal_schedule(&beliefs, &market, &schedule, 0.05)?.is_confirmed())
}

fn auction_check(cfg: &RunConfig) -> Result<CheckResult> {
    let mut cases = 0;
    let mut failures = 0;
    let mut skipped = 0;
    if cfg.market.m_deals > ORACLE_MAX_DEALS {
        skipped = 1;
    } else {
        let mut index = 0u64;
        for kind in &cfg.kinds {
            for &c in &cfg.c_m {
                let val = valuation(&cfg.firm, &kind.at(c))?;
                for &lam in &cfg.lambda {
                    let market = cfg.market.with_lambda(lam);
                    for _ in 0..AUCTIONS_PER_POINT {
                        let seed = derive_seed(cfg.seed ^ 0xa5a5_a5a5, index);
                        index += 1;
                        let n_u = sample_arrivals(&market, derive_seed(seed, 0));
                        if market.n_informed + n_u > ORACLE_MAX_TRADERS {
                            skipped += 1;
                            continue;
                        }
                        let beliefs = BeliefProfile {
                            informed_value: val.fair,
                            noise_estimates: sample_noise_beliefs(n_u, val.floor, val.ceiling, derive_seed(seed, 1))?,
                            floor: val.floor,
                            ceiling: val.ceiling,
                        };
                        let step = ((val.ceiling - val.floor) / 100.0).max(f64::MIN_POSITIVE);
                        cases += 1;
                        let v = brute_force_equilibrium_check(&beliefs, &market, step)?;
                        failures += usize::from(!v.is_confirmed());
                    }
                }
            }
        }
    }
    let detected = oracle_self_test()?;
    Ok(CheckResult {
        name: "auction_vs_brute_force",
        cases: cases + 1,
        failures: failures + usize::from(!detected),
        detail: format!("skipped={skipped} counterexample_detected={detected}"),
    })
}

fn mc_check(cfg: &RunConfig) -> Result<CheckResult> {
    let rows = simulated_rows(cfg)?;
    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(CheckResult {
        name: "mc_vs_analytic",
        cases: rows.len(),
        failures: flagged,
        detail: format!("trials={} flag_se={MC_FLAG_SE}", cfg.trials),
    })
}

fn s0_monotonicity_check(cfg: &RunConfig) -> Result<CheckResult> {
    let rows = super::table::analytic_rows(cfg)?;
    let mut cases = 0;
    let mut failures = 0;
    for a in &rows {
        for b in &rows {
            if a.firm_kind == b.firm_kind && a.c_m == b.c_m && a.lambda == b.lambda && a.s0 < b.s0 {
                cases += 1;
                failures += usize::from(b.ill_analytic < a.ill_analytic);
            }
        }
    }
    Ok(CheckResult {
        name: "ill_nondecreasing_in_s0",
        cases,
        failures,
        detail: String::new(),
    })
}

/// Runs every check at the configured parameters.
pub fn run_validation(cfg: &RunConfig, opts: ValidateOptions) -> Result<ValidationReport> {
    let pts = kernel_points(cfg)?;
    Ok(ValidationReport {
        checks: vec![
            series_check(cfg, &pts)?,
            derivative_check(&pts, opts)?,
            kernel_inequality_check(&pts)?,
            auction_check(cfg)?,
            mc_check(cfg)?,
            s0_monotonicity_check(cfg)?,
        ],
    })
}
