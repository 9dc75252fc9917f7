//! Synergy report: arrival-rate and governance differences of `ILL` with
//! their orderings, and the map of derivative signs over the grid.

use std::fmt::Write as _;

use crate::error::{Error, FieldError, Result};
use crate::firm_model::{agency_cost_share, s_bar, FirmParams, GovernanceSpec};
use crate::liquidity::{cross_partial_signs, delta_cm_ill, delta_lambda_ill, FdSteps, LiquidityQuery, Sign};

use super::config::{KindTemplate, RunConfig};
use super::table::fmt_sig;

/// Relative gap required before two differences count as strictly ordered.
pub const STRICT_REL_GAP: f64 = 1e-9;

/// True when `b` exceeds `a` by more than the relative gap.
pub fn strictly_above(b: f64, a: f64) -> bool {
    if b.is_infinite() && b > 0.0 {
        return !(a.is_infinite() && a > 0.0);
    }
    b - a > STRICT_REL_GAP * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynergyReport {
    pub text: String,
    pub violations: usize,
}

fn s_bar_of(gov: &GovernanceSpec, firm: &FirmParams) -> f64 {
    s_bar(gov, agency_cost_share(gov, firm))
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_else(|| "n/a".into())
}

/// Checks that consecutive defined entries move strictly in one direction.
fn ordered(values: &[Option<f64>], increasing: bool) -> bool {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    defined.windows(2).all(|w| {
        if increasing {
            strictly_above(w[1], w[0])
        } else {
            strictly_above(w[0], w[1])
        }
    })
}

fn lambda_table(cfg: &RunConfig, kind: &KindTemplate, out: &mut String) -> Result<usize> {
    let (l1, l2) = cfg.lambda_pair();
    let c_ref = cfg.c_m[0];
    let mut violations = 0;
    for &q in cfg.queries.values() {
        let s0 = cfg.queries.resolve(q, s_bar_of(&kind.anchored(c_ref, c_ref), &cfg.firm));
        let query = LiquidityQuery::new(s0)?;
        let mut vals = Vec::new();
        for &c in &cfg.c_m {
            let gov = kind.anchored(c_ref, c);
            let v = if s0 < s_bar_of(&gov, &cfg.firm) {
                Some(delta_lambda_ill(&query, &gov, &cfg.firm, &cfg.market, l1, l2)?)
            } else {
                None
            };
            vals.push(v);
        }
        let ok = ordered(&vals, false);
        violations += usize::from(!ok);
        let cells: Vec<String> = vals.iter().map(|v| cell(*v)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            kind.label(),
            fmt_sig(s0),
            cells.join(","),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(violations)
}

fn cm_table(cfg: &RunConfig, kind: &KindTemplate, out: &mut String) -> Result<usize> {
    let (c1, c2) = cfg.cm_pair();
    let worse = kind.anchored(c2, c1);
    let better = kind.anchored(c2, c2);
    let mut violations = 0;
    for &q in cfg.queries.values() {
        let s0 = cfg.queries.resolve(q, s_bar_of(&better, &cfg.firm));
        let query = LiquidityQuery::new(s0)?;
        let mut vals = Vec::new();
        for &l in &cfg.lambda {
            let market = cfg.market.with_lambda(l);
            let v = if s0 < s_bar_of(&worse, &cfg.firm) {
                Some(delta_cm_ill(&query, &worse, &better, &cfg.firm, &market)?)
            } else {
                None
            };
            vals.push(v);
        }
        let ok = ordered(&vals, true);
        violations += usize::from(!ok);
        let cells: Vec<String> = vals.iter().map(|v| cell(*v)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            kind.label(),
            fmt_sig(s0),
            cells.join(","),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(violations)
}

fn sign_map(cfg: &RunConfig, kind: &KindTemplate, out: &mut String) -> Result<usize> {
    let mut violations = 0;
    for &c in &cfg.c_m {
        let gov = kind.at(c);
        let sb = s_bar_of(&gov, &cfg.firm);
        for &l in &cfg.lambda {
            for &q in cfg.queries.values() {
                let s0 = cfg.queries.resolve(q, sb);
                if c == 0.0 || s0 >= sb {
                    continue;
                }
                let market = cfg.market.with_lambda(l);
                let res = cross_partial_signs(&LiquidityQuery::new(s0)?, &gov, &cfg.firm, &market, &FdSteps::default());
                let (signs, status) = match res {
                    Ok(r) => {
                        let ok = if l > 0.0 {
                            r.matches_theory()
                        } else {
                            r.d_ill_d_cm.sign == Sign::Zero
                        };
                        (
                            format!(
                                "{},{},{},{}{}{}",
                                fmt_sig(r.d_ill_d_lambda.value),
                                fmt_sig(r.d_ill_d_cm.value),
                                fmt_sig(r.d2_ill_dcm_dlambda.value),
                                r.d_ill_d_lambda.sign,
                                r.d_ill_d_cm.sign,
                                r.d2_ill_dcm_dlambda.sign
                            ),
                            ok,
                        )
                    }
                    Err(Error::DegenerateStep(msg)) => (format!(",,,degenerate: {}", msg.replace(',', ";")), false),
                    Err(e) => return Err(e),
                };
                violations += usize::from(!status);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    kind.label(),
                    fmt_sig(c),
                    fmt_sig(l),
                    fmt_sig(s0),
                    signs,
                    if status { "PASS" } else { "FAIL" }
                );
            }
        }
    }
    Ok(violations)
}

/// Builds the synergy report. Needs at least two governance levels and two rates.
pub fn synergy_report(cfg: &RunConfig) -> Result<SynergyReport> {
    let mut errs = Vec::new();
    if cfg.c_m.len() < 2 {
        errs.push(FieldError::new("sweep.c_m", "synergy needs at least two governance levels"));
    }
    if cfg.lambda.len() < 2 {
        errs.push(FieldError::new("sweep.lambda", "synergy needs at least two arrival rates"));
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }

    let mut text = String::new();
    let mut violations = 0;
    let c_cols: Vec<String> = cfg.c_m.iter().map(|c| format!("c_m={}", fmt_sig(*c))).collect();
    let l_cols: Vec<String> = cfg.lambda.iter().map(|l| format!("lambda={}", fmt_sig(*l))).collect();

    let _ = writeln!(
        text,
        "# delta_lambda_ill, lambda1={} lambda2={}; expected strictly decreasing in c_m",
        fmt_sig(cfg.lambda_pair().0),
        fmt_sig(cfg.lambda_pair().1)
    );
    let _ = writeln!(text, "firm_kind,s0,{},ordering", c_cols.join(","));
    for kind in &cfg.kinds {
        violations += lambda_table(cfg, kind, &mut text)?;
    }

    let _ = writeln!(
        text,
        "\n# delta_cm_ill, c_m1={} c_m2={}; expected strictly increasing in lambda",
        fmt_sig(cfg.cm_pair().0),
        fmt_sig(cfg.cm_pair().1)
    );
    let _ = writeln!(text, "firm_kind,s0,{},ordering", l_cols.join(","));
    for kind in &cfg.kinds {
        violations += cm_table(cfg, kind, &mut text)?;
    }

    let _ = writeln!(text, "\n# derivative signs; expected (+,-,-) for lambda > 0 and d_ill_d_cm = 0 at lambda = 0");
    let _ = writeln!(
        text,
        "firm_kind,c_m,lambda,s0,d_ill_d_lambda,d_ill_d_cm,d2_ill_dcm_dlambda,signs,status"
    );
    for kind in &cfg.kinds {
        violations += sign_map(cfg, kind, &mut text)?;
    }
    let _ = writeln!(text, "\nviolations={violations}");
    Ok(SynergyReport { text, violations })
}
