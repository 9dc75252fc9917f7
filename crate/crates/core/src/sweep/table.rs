//! Grid evaluation of `F` and `ILL`, optional Monte Carlo columns, and CSV rendering.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::Result;
use crate::firm_model::{agency_cost_share, s_bar};
use crate::liquidity::{f_s0, g_s0, mc_estimate_f, mc_z_score, Ill, LiquidityQuery};
use crate::rng::derive_seed;

use super::config::{KindTemplate, RunConfig};

pub const CSV_HEADER: &str = "c_m,lambda,s0,rho,s_bar,g,f_analytic,ill_analytic,f_mc,f_mc_se,firm_kind";

/// Disagreement beyond this many binomial standard errors flags a row.
pub const MC_FLAG_SE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub c_m: f64,
    pub lambda: f64,
    pub s0: f64,
    pub rho: f64,
    pub s_bar: f64,
    pub g: f64,
    pub f_analytic: f64,
    pub ill_analytic: Ill,
    pub f_mc: Option<f64>,
    pub f_mc_se: Option<f64>,
    pub firm_kind: &'static str,
}

/// A row with its Monte Carlo agreement flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRow {
    pub row: SweepRow,
    pub flagged: bool,
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn grid_order(a: &SweepRow, b: &SweepRow) -> Ordering {
    let key = |r: &SweepRow| [r.c_m, r.lambda, r.s0];
    key(a)
        .partial_cmp(&key(b))
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.firm_kind.cmp(b.firm_kind))
}

fn analytic_row(cfg: &RunConfig, kind: &KindTemplate, c_m: f64, lambda: f64, q: f64) -> Result<SweepRow> {
    let gov = kind.at(c_m);
    let rho = agency_cost_share(&gov, &cfg.firm);
    let sb = s_bar(&gov, rho);
    let s0 = cfg.queries.resolve(q, sb);
    let market = cfg.market.with_lambda(lambda);
    let point = f_s0(&LiquidityQuery::new(s0)?, &gov, &cfg.firm, &market, &cfg.series)?;
    Ok(SweepRow {
        c_m,
        lambda,
        s0,
        rho,
        s_bar: sb,
        g: g_s0(s0, &gov, rho)?,
        f_analytic: point.f_value,
        ill_analytic: point.ill_value,
        f_mc: None,
        f_mc_se: None,
        firm_kind: kind.label(),
    })
}

/// Analytic rows over the full grid, sorted by `(c_m, lambda, s0, firm_kind)`.
pub fn analytic_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for kind in &cfg.kinds {
        for &c in &cfg.c_m {
            for &l in &cfg.lambda {
                for &q in cfg.queries.values() {
                    rows.push(analytic_row(cfg, kind, c, l, q)?);
                }
            }
        }
    }
    rows.sort_by(grid_order);
    Ok(rows)
}

/// Analytic rows with Monte Carlo estimates; row `i` uses seed `derive_seed(cfg.seed, i)`.
pub fn simulated_rows(cfg: &RunConfig) -> Result<Vec<SimulatedRow>> {
    let rows = analytic_rows(cfg)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, mut row) in rows.into_iter().enumerate() {
        let kind = cfg
            .kinds
            .iter()
            .find(|k| k.label() == row.firm_kind)
            .expect("row kind comes from the config");
        let est = mc_estimate_f(
            &LiquidityQuery::new(row.s0)?,
            &kind.at(row.c_m),
            &cfg.firm,
            &cfg.market.with_lambda(row.lambda),
            cfg.trials,
            derive_seed(cfg.seed, i as u64),
        )?;
        row.f_mc = Some(est.estimate);
        row.f_mc_se = Some(est.std_error);
        let flagged = mc_z_score(&est, row.f_analytic) > MC_FLAG_SE;
        out.push(SimulatedRow { row, flagged });
    }
    Ok(out)
}

fn push_row(out: &mut String, r: &SweepRow) {
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    let ill = if r.ill_analytic.is_infinite() {
        "inf".to_string()
    } else {
        fmt_sig(r.ill_analytic.value())
    };
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        fmt_sig(r.c_m),
        fmt_sig(r.lambda),
        fmt_sig(r.s0),
        fmt_sig(r.rho),
        fmt_sig(r.s_bar),
        fmt_sig(r.g),
        fmt_sig(r.f_analytic),
        ill,
        opt(r.f_mc),
        opt(r.f_mc_se),
        r.firm_kind
    );
}

pub fn render_analytic_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        push_row(&mut out, r);
        out.push('\n');
    }
    out
}

/// CSV with a trailing `mc_flag` column (1 when the row disagrees).
pub fn render_simulated_csv(rows: &[SimulatedRow]) -> String {
    let mut out = format!("{CSV_HEADER},mc_flag\n");
    for r in rows {
        push_row(&mut out, &r.row);
        let _ = writeln!(out, ",{}", u8::from(r.flagged));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::config::parse_config;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(123456.789), "123456.789");
        assert_eq!(fmt_sig(1e-17), "1e-17");
        assert_eq!(fmt_sig(1.5e-5), "1.5e-05");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(1e12), "1e+12");
        assert_eq!(fmt_sig(999999999999.9), "1e+12");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
    }

    #[test]
    fn zero_rate_row_and_inf_row() {
        let cfg = parse_config("sweep.c_m = 0.4\nsweep.lambda = 0\nqueries.s0 = 0.05, 0.9\n").unwrap();
        let rows = analytic_rows(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].f_analytic, 1.0);
        assert_eq!(rows[0].ill_analytic.value(), 0.0);
        let csv = render_analytic_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].ends_with(",1,0,,,general"), "{}", lines[1]);
        assert!(lines[2].contains(",0,inf,,,general"), "{}", lines[2]);
    }

    #[test]
    fn rows_sorted_by_grid_key() {
        let cfg = parse_config(
            "sweep.c_m = 0.2, 0.4\nsweep.lambda = 1, 2\nqueries.s0_fraction = 0, 0.5\ngovernance.kinds = controlled, general\n",
        )
        .unwrap();
        let rows = analytic_rows(&cfg).unwrap();
        assert_eq!(rows.len(), 16);
        assert!(rows.windows(2).all(|w| grid_order(&w[0], &w[1]) == Ordering::Less));
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.f_analytic));
            if !r.ill_analytic.is_infinite() {
                assert!((r.ill_analytic.value() + r.f_analytic.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_rate_simulation_is_exact() {
        let cfg = parse_config("sweep.c_m = 0.4\nsweep.lambda = 0\nqueries.s0 = 0.05\nrun.trials = 200\n").unwrap();
        let rows = simulated_rows(&cfg).unwrap();
        assert_eq!(rows[0].row.f_mc, Some(1.0));
        assert!(!rows[0].flagged);
        assert!(render_simulated_csv(&rows).lines().nth(1).unwrap().ends_with(",1,0,1,0,general,0"));
    }
}
