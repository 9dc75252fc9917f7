//! Synergy between governance and noise-trader participation: finite
//! differences of `ILL` across arrival rates and governance levels, and
//! numerical signs of its first and mixed partial derivatives.

use std::fmt;

use crate::auction::MarketParams;
use crate::error::{Error, Result};
use crate::firm_model::{agency_cost_share, s_bar, FirmParams, GovernanceSpec};

use super::{f_s0, LiquidityQuery, SeriesControl};

/// `ILL` as a plain float, `+inf` when `F = 0`.
fn ill(s0: f64, gov: &GovernanceSpec, firm: &FirmParams, market: &MarketParams) -> Result<f64> {
    let q = LiquidityQuery { s0 };
    Ok(f_s0(&q, gov, firm, market, &SeriesControl::default())?.ill_value.value())
}

fn below_s_bar(s0: f64, gov: &GovernanceSpec, firm: &FirmParams) -> bool {
    s0 < s_bar(gov, agency_cost_share(gov, firm))
}

/// `ILL(c_m, lambda2) - ILL(c_m, lambda1)` for `lambda1 < lambda2`.
pub fn delta_lambda_ill(
    query: &LiquidityQuery,
    gov: &GovernanceSpec,
    firm: &FirmParams,
    market: &MarketParams,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    if !(lambda1 >= 0.0 && lambda1 < lambda2) {
        return Err(Error::domain(format!(
            "need 0 <= lambda1 < lambda2, got lambda1 = {lambda1}, lambda2 = {lambda2}"
        )));
    }
    if !below_s_bar(query.s0, gov, firm) {
        return Err(Error::domain(format!("s0 = {} is not below s_bar", query.s0)));
    }
    let lo = ill(query.s0, gov, firm, &market.with_lambda(lambda1))?;
    let hi = ill(query.s0, gov, firm, &market.with_lambda(lambda2))?;
    Ok(hi - lo)
}

/// `ILL(c_m^2, lambda) - ILL(c_m^1, lambda)` for the better-governed
/// `better.c_m < worse.c_m`, at the rate in `market`.
///
/// Returns `+inf` when `s0` reaches `s_bar` under the better governance only.
pub fn delta_cm_ill(
    query: &LiquidityQuery,
    worse: &GovernanceSpec,
    better: &GovernanceSpec,
    firm: &FirmParams,
    market: &MarketParams,
) -> Result<f64> {
    if !(better.c_m < worse.c_m) {
        return Err(Error::domain(format!(
            "need c_m^2 < c_m^1, got c_m^2 = {}, c_m^1 = {}",
            better.c_m, worse.c_m
        )));
    }
    let ill_worse = ill(query.s0, worse, firm, market)?;
    let ill_better = ill(query.s0, better, firm, market)?;
    match (ill_better.is_infinite(), ill_worse.is_infinite()) {
        (true, false) => Ok(f64::INFINITY),
        (false, false) => Ok(ill_better - ill_worse),
        (_, true) => Err(Error::domain(format!(
            "s0 = {} is not below s_bar at c_m = {}; the difference is undefined",
            query.s0, worse.c_m
        ))),
    }
}

/// Relative finite-difference steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub first_rel: f64,
    pub mixed_rel: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self {
            first_rel: 1e-4,
            mixed_rel: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
            Sign::Zero => "0",
        })
    }
}

/// A finite-difference derivative with the rounding-noise level it was judged against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub noise_floor: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignReport {
    pub d_ill_d_lambda: Derivative,
    pub d_ill_d_cm: Derivative,
    pub d2_ill_dcm_dlambda: Derivative,
}

impl SignReport {
    /// True for the pattern `(+, -, -)`.
    pub fn matches_theory(&self) -> bool {
        self.d_ill_d_lambda.sign == Sign::Positive
            && self.d_ill_d_cm.sign == Sign::Negative
            && self.d2_ill_dcm_dlambda.sign == Sign::Negative
    }
}

/// Relative rounding error assumed for a single `ILL` evaluation.
const ILL_REL_EPS: f64 = 1e-13;

fn classify(value: f64, noise: f64) -> Sign {
    if value.abs() <= noise {
        Sign::Zero
    } else if value > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// Evaluates `ILL` on a stencil and rejects degenerate steps.
struct Surface<'a> {
    s0: f64,
    gov: &'a GovernanceSpec,
    firm: &'a FirmParams,
    market: &'a MarketParams,
}

impl Surface<'_> {
    fn at(&self, c_m: f64, lambda: f64) -> Result<f64> {
        if !(c_m > 0.0 && c_m < 1.0) {
            return Err(Error::DegenerateStep(format!("stencil point c_m = {c_m} leaves (0, 1)")));
        }
        let gov = self.gov.with_c_m(c_m);
        if !below_s_bar(self.s0, &gov, self.firm) {
            return Err(Error::DegenerateStep(format!(
                "stencil point c_m = {c_m} puts s0 = {} at or above s_bar",
                self.s0
            )));
        }
        let v = ill(self.s0, &gov, self.firm, &self.market.with_lambda(lambda))?;
        if !v.is_finite() {
            return Err(Error::DegenerateStep(format!("ILL is not finite at c_m = {c_m}, lambda = {lambda}")));
        }
        Ok(v)
    }
}

/// Step `h` around `x`, rejecting steps lost to rounding.
fn step(x: f64, rel: f64, what: &str) -> Result<f64> {
    let h = rel * if x > 0.0 { x } else { 1.0 };
    if !(h > 0.0) || x + h == x {
        return Err(Error::DegenerateStep(format!("step for {what} vanishes at {x}")));
    }
    Ok(h)
}

/// Central difference with one Richardson refinement when the first estimate
/// sits inside the noise floor.
fn refine<F>(h: f64, diff: F) -> Result<Derivative>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let (d1, n1) = diff(h)?;
    let s1 = classify(d1, n1);
    if s1 != Sign::Zero {
        return Ok(Derivative {
            value: d1,
            noise_floor: n1,
            sign: s1,
        });
    }
    let (d2, n2) = diff(0.5 * h)?;
    let value = (4.0 * d2 - d1) / 3.0;
    let noise = (4.0 * n2 + n1) / 3.0;
    Ok(Derivative {
        value,
        noise_floor: noise,
        sign: classify(value, noise),
    })
}

fn max_abs(vals: &[f64]) -> f64 {
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Finite-difference estimates and signs of `dILL/dlambda`, `dILL/dc_m` and
/// `d2ILL/dc_m dlambda` at the point given by `gov.c_m` and `market.lambda`.
///
/// Differences are central, except in `lambda` at `lambda = 0` where they are
/// forward. Any other parameter of `gov` (such as a controlled firm's `rho0`)
/// is held fixed while `c_m` moves.
pub fn cross_partial_signs(
    query: &LiquidityQuery,
    gov: &GovernanceSpec,
    firm: &FirmParams,
    market: &MarketParams,
    steps: &FdSteps,
) -> Result<SignReport> {
    let surf = Surface {
        s0: query.s0,
        gov,
        firm,
        market,
    };
    let c = gov.c_m;
    let lam = market.lambda;
    let forward = lam == 0.0;

    let d_lambda = refine(step(lam, steps.first_rel, "lambda")?, |h| {
        let (a, b, span) = if forward {
            (surf.at(c, lam)?, surf.at(c, lam + h)?, h)
        } else {
            (surf.at(c, lam - h)?, surf.at(c, lam + h)?, 2.0 * h)
        };
        Ok(((b - a) / span, ILL_REL_EPS * max_abs(&[a, b]) / span))
    })?;

    let d_cm = refine(step(c, steps.first_rel, "c_m")?, |h| {
        let (a, b) = (surf.at(c - h, lam)?, surf.at(c + h, lam)?);
        Ok(((b - a) / (2.0 * h), ILL_REL_EPS * max_abs(&[a, b]) / (2.0 * h)))
    })?;

    let hl = step(lam, steps.mixed_rel, "lambda")?;
    let hc = step(c, steps.mixed_rel, "c_m")?;
    let d_mixed = refine(1.0, |scale| {
        let (hc, hl) = (hc * scale, hl * scale);
        let (l_lo, l_hi, l_span) = if forward { (lam, lam + hl, hl) } else { (lam - hl, lam + hl, 2.0 * hl) };
        let pp = surf.at(c + hc, l_hi)?;
        let pm = surf.at(c + hc, l_lo)?;
        let mp = surf.at(c - hc, l_hi)?;
        let mm = surf.at(c - hc, l_lo)?;
        let denom = 2.0 * hc * l_span;
        Ok((
            (pp - pm - mp + mm) / denom,
            ILL_REL_EPS * max_abs(&[pp, pm, mp, mm]) * 2.0 / denom,
        ))
    })?;

    Ok(SignReport {
        d_ill_d_lambda: d_lambda,
        d_ill_d_cm: d_cm,
        d2_ill_dcm_dlambda: d_mixed,
    })
}
