//! Run configuration: a flat `key = value` document with dotted section
//! paths, `#` comments, comma-separated lists and `start:stop:step` ranges.
//!
//! ```text
//! firm.theta = 0.4
//! governance.kinds = general, controlled
//! sweep.c_m = 0.1:0.6:0.1
//! sweep.lambda = 0.5, 1, 2, 4, 8
//! queries.s0_fraction = 0, 0.25, 0.5, 0.75
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::auction::MarketParams;
use crate::error::{Error, FieldError, Result};
use crate::firm_model::{FirmParams, GovernanceSpec, PenaltyScale};
use crate::liquidity::SeriesControl;

/// How a controlled firm's entrenched agency cost is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho0Rule {
    Fixed(f64),
    /// `rho0 = ratio * c_ref`, where `c_ref` is the governance level of the
    /// point, or the smallest level of a comparison.
    Ratio(f64),
}

/// A firm type whose governance level is supplied by the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KindTemplate {
    General(PenaltyScale),
    Controlled(Rho0Rule),
}

impl KindTemplate {
    pub fn label(&self) -> &'static str {
        match self {
            KindTemplate::General(_) => "general",
            KindTemplate::Controlled(_) => "controlled",
        }
    }

    /// Governance at `c_m` with any ratio rule anchored at `c_m` itself.
    pub fn at(&self, c_m: f64) -> GovernanceSpec {
        self.anchored(c_m, c_m)
    }

    /// Governance at `c_m` with any ratio rule anchored at `c_ref`.
    pub fn anchored(&self, c_ref: f64, c_m: f64) -> GovernanceSpec {
        match *self {
            KindTemplate::General(f) => GovernanceSpec::general(c_m, f.kappa, f.beta),
            KindTemplate::Controlled(Rho0Rule::Fixed(rho0)) => GovernanceSpec::controlled(c_m, rho0),
            KindTemplate::Controlled(Rho0Rule::Ratio(q)) => GovernanceSpec::controlled(c_m, q * c_ref),
        }
    }
}

/// Discount thresholds, either absolute or as fractions of `s_bar`.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryGrid {
    Absolute(Vec<f64>),
    FractionOfSBar(Vec<f64>),
}

impl QueryGrid {
    pub fn values(&self) -> &[f64] {
        match self {
            QueryGrid::Absolute(v) | QueryGrid::FractionOfSBar(v) => v,
        }
    }

    /// The threshold for entry `value` given the relevant `s_bar`.
    pub fn resolve(&self, value: f64, s_bar: f64) -> f64 {
        match self {
            QueryGrid::Absolute(_) => value,
            QueryGrid::FractionOfSBar(_) => value * s_bar,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub firm: FirmParams,
    pub kinds: Vec<KindTemplate>,
    pub market: MarketParams,
    pub queries: QueryGrid,
    pub c_m: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Rates `(lambda1, lambda2)` for the arrival-rate differences; the grid ends when unset.
    pub lambda_pair: Option<(f64, f64)>,
    /// Levels `(c_m^1, c_m^2)` with `c_m^2 < c_m^1` for the governance
    /// differences; the largest and smallest grid levels when unset.
    pub cm_pair: Option<(f64, f64)>,
    pub trials: u64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub series: SeriesControl,
}

pub const DEFAULT_TRIALS: u64 = 100_000;

struct Entry {
    value: String,
    line: usize,
    column: usize,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

const KEYS: &[&str] = &[
    "firm.alpha",
    "firm.delta",
    "firm.r",
    "firm.mu_z",
    "firm.sigma_z",
    "firm.theta",
    "firm.gamma",
    "firm.s_total",
    "firm.z0",
    "firm.t_eval",
    "firm.w_t",
    "governance.kind",
    "governance.kinds",
    "governance.kappa",
    "governance.beta",
    "governance.rho0",
    "governance.rho0_ratio",
    "market.lambda",
    "market.delta_t",
    "market.n_informed",
    "market.m_deals",
    "market.n_shares",
    "sweep.c_m",
    "sweep.lambda",
    "queries.s0",
    "queries.s0_fraction",
    "synergy.lambda_pair",
    "synergy.cm_pair",
    "run.trials",
    "run.seed",
    "series.tail_tol",
    "series.max_terms",
    "output.path",
];

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            let col = body.len() - body.trim_start().len() + 1;
            return Err(parse_err(line, col, "expected `key = value`"));
        };
        let key_part = &body[..eq];
        let key = key_part.trim();
        let key_col = key_part.len() - key_part.trim_start().len() + 1;
        if key.is_empty() {
            return Err(parse_err(line, key_col, "missing key before `=`"));
        }
        if !KEYS.contains(&key) {
            return Err(parse_err(line, key_col, format!("unknown key `{key}`")));
        }
        let val_part = &body[eq + 1..];
        let value = val_part.trim();
        let column = eq + 2 + (val_part.len() - val_part.trim_start().len());
        if value.is_empty() {
            return Err(parse_err(line, column, format!("missing value for `{key}`")));
        }
        if out.contains_key(key) {
            return Err(parse_err(line, key_col, format!("duplicate key `{key}`")));
        }
        out.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
                column,
            },
        );
    }
    Ok(out)
}

/// Comma-separated items with their starting columns.
fn items(e: &Entry) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in e.value.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        out.push((piece.trim(), e.column + offset + lead));
        offset += piece.len() + 1;
    }
    out
}

fn number(text: &str, line: usize, column: usize) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| parse_err(line, column, format!("`{text}` is not a number")))
}

/// Rounds away the representation noise accumulated by `start + i * step`.
fn tidy(x: f64) -> f64 {
    format!("{x:.12e}").parse().unwrap_or(x)
}

fn expand_range(text: &str, line: usize, column: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(parse_err(line, column, format!("range `{text}` must be start:stop:step")));
    }
    let start = number(parts[0].trim(), line, column)?;
    let stop = number(parts[1].trim(), line, column)?;
    let step = number(parts[2].trim(), line, column)?;
    if !(step > 0.0) {
        return Err(parse_err(line, column, format!("range step in `{text}` must be positive")));
    }
    if stop < start {
        return Err(parse_err(line, column, format!("range `{text}` runs backwards")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| tidy(start + i as f64 * step)).collect())
}

fn number_list(e: &Entry) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (item, col) in items(e) {
        if item.is_empty() {
            return Err(parse_err(e.line, col, "empty list item"));
        }
        if item.contains(':') {
            out.extend(expand_range(item, e.line, col)?);
        } else {
            out.push(number(item, e.line, col)?);
        }
    }
    Ok(out)
}

fn scalar(e: &Entry) -> Result<f64> {
    number(&e.value, e.line, e.column)
}

fn unsigned(e: &Entry) -> Result<u64> {
    let v = e.value.replace('_', "");
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    // allow 1e5 style integers
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => Ok(x as u64),
        _ => Err(parse_err(e.line, e.column, format!("`{}` is not a non-negative integer", e.value))),
    }
}

fn pair(e: &Entry) -> Result<(f64, f64)> {
    let v = number_list(e)?;
    if v.len() != 2 {
        return Err(parse_err(e.line, e.column, "expected exactly two values"));
    }
    Ok((v[0], v[1]))
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc = tokenize(text)?;
    let get = |k: &str| doc.get(k);

    let mut firm = FirmParams::default();
    let firm_fields: [(&str, &mut f64); 11] = [
        ("firm.alpha", &mut firm.alpha),
        ("firm.delta", &mut firm.delta),
        ("firm.r", &mut firm.r),
        ("firm.mu_z", &mut firm.mu_z),
        ("firm.sigma_z", &mut firm.sigma_z),
        ("firm.theta", &mut firm.theta),
        ("firm.gamma", &mut firm.gamma),
        ("firm.s_total", &mut firm.s_total),
        ("firm.z0", &mut firm.z0),
        ("firm.t_eval", &mut firm.t_eval),
        ("firm.w_t", &mut firm.w_t),
    ];
    for (key, slot) in firm_fields {
        if let Some(e) = get(key) {
            *slot = scalar(e)?;
        }
    }

    let mut market = MarketParams::default();
    if let Some(e) = get("market.lambda") {
        market.lambda = scalar(e)?;
    }
    if let Some(e) = get("market.delta_t") {
        market.delta_t = scalar(e)?;
    }
    if let Some(e) = get("market.n_informed") {
        market.n_informed = unsigned(e)? as usize;
    }
    if let Some(e) = get("market.m_deals") {
        market.m_deals = unsigned(e)? as usize;
    }
    if let Some(e) = get("market.n_shares") {
        market.n_shares_per_deal = u32::try_from(unsigned(e)?)
            .map_err(|_| parse_err(e.line, e.column, "share count does not fit in 32 bits"))?;
    }

    let penalty = PenaltyScale {
        kappa: get("governance.kappa").map(scalar).transpose()?.unwrap_or(1.0),
        beta: get("governance.beta").map(scalar).transpose()?.unwrap_or(1.0),
    };
    let rho0 = match (get("governance.rho0"), get("governance.rho0_ratio")) {
        (Some(e), Some(_)) => {
            return Err(parse_err(e.line, 1, "give governance.rho0 or governance.rho0_ratio, not both"));
        }
        (Some(e), None) => Rho0Rule::Fixed(scalar(e)?),
        (None, Some(e)) => Rho0Rule::Ratio(scalar(e)?),
        (None, None) => Rho0Rule::Ratio(0.5),
    };
    let kind_entry = match (get("governance.kind"), get("governance.kinds")) {
        (Some(e), Some(_)) => {
            return Err(parse_err(e.line, 1, "give governance.kind or governance.kinds, not both"));
        }
        (a, b) => a.or(b),
    };
    let mut kinds = Vec::new();
    match kind_entry {
        None => kinds.push(KindTemplate::General(penalty)),
        Some(e) => {
            for (word, col) in items(e) {
                let k = match word {
                    "general" => KindTemplate::General(penalty),
                    "controlled" => KindTemplate::Controlled(rho0),
                    other => {
                        return Err(parse_err(
                            e.line,
                            col,
                            format!("unknown firm kind `{other}` (expected general or controlled)"),
                        ))
                    }
                };
                if kinds.iter().any(|x: &KindTemplate| x.label() == k.label()) {
                    return Err(parse_err(e.line, col, format!("firm kind `{word}` listed twice")));
                }
                kinds.push(k);
            }
        }
    }

    let c_m = match get("sweep.c_m") {
        Some(e) => number_list(e)?,
        None => Vec::new(),
    };
    let lambda = match get("sweep.lambda") {
        Some(e) => number_list(e)?,
        None => vec![market.lambda],
    };
    let queries = match (get("queries.s0"), get("queries.s0_fraction")) {
        (Some(e), Some(_)) => {
            return Err(parse_err(e.line, 1, "give queries.s0 or queries.s0_fraction, not both"));
        }
        (Some(e), None) => QueryGrid::Absolute(number_list(e)?),
        (None, Some(e)) => QueryGrid::FractionOfSBar(number_list(e)?),
        (None, None) => QueryGrid::Absolute(Vec::new()),
    };
    let lambda_pair = get("synergy.lambda_pair").map(pair).transpose()?;
    let cm_pair = get("synergy.cm_pair").map(pair).transpose()?;

    let mut series = SeriesControl::default();
    if let Some(e) = get("series.tail_tol") {
        series.tail_tol = scalar(e)?;
    }
    if let Some(e) = get("series.max_terms") {
        series.max_terms = unsigned(e)? as usize;
    }

    let cfg = RunConfig {
        firm,
        kinds,
        market,
        queries,
        c_m,
        lambda,
        lambda_pair,
        cm_pair,
        trials: get("run.trials").map(unsigned).transpose()?.unwrap_or(DEFAULT_TRIALS),
        seed: get("run.seed").map(unsigned).transpose()?.unwrap_or(0),
        output_path: get("output.path").map(|e| PathBuf::from(&e.value)),
        series,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Every invariant violation, listed together.
    pub fn check(&self) -> Vec<FieldError> {
        let mut errs = self.firm.check("firm.");
        errs.extend(self.market.check("market."));

        if self.c_m.is_empty() {
            errs.push(FieldError::new("sweep.c_m", "required and must be non-empty"));
        } else if !strictly_increasing(&self.c_m) {
            errs.push(FieldError::new("sweep.c_m", "must be strictly increasing"));
        }
        if self.c_m.iter().any(|c| !(0.0..1.0).contains(c)) {
            errs.push(FieldError::new("sweep.c_m", "values must lie in [0, 1)"));
        }
        if self.lambda.is_empty() || !strictly_increasing(&self.lambda) {
            errs.push(FieldError::new("sweep.lambda", "must be non-empty and strictly increasing"));
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            errs.push(FieldError::new("sweep.lambda", "values must be finite and non-negative"));
        }

        let (qkey, qvals) = match &self.queries {
            QueryGrid::Absolute(v) => ("queries.s0", v),
            QueryGrid::FractionOfSBar(v) => ("queries.s0_fraction", v),
        };
        if qvals.is_empty() {
            errs.push(FieldError::new("queries", "give queries.s0 or queries.s0_fraction"));
        } else if !strictly_increasing(qvals) {
            errs.push(FieldError::new(qkey, "must be strictly increasing"));
        }
        if qvals.iter().any(|q| !(0.0..1.0).contains(q)) {
            errs.push(FieldError::new(qkey, "values must lie in [0, 1)"));
        }

        for kind in &self.kinds {
            let mut seen = Vec::new();
            for &c in &self.c_m {
                for e in kind.at(c).check("governance.") {
                    if !seen.contains(&e.path) {
                        seen.push(e.path.clone());
                        errs.push(FieldError::new(
                            e.path,
                            format!("{} ({} firm at c_m = {c})", e.reason, kind.label()),
                        ));
                    }
                }
            }
            if let KindTemplate::Controlled(Rho0Rule::Ratio(q)) = kind {
                if !(0.0..=1.0).contains(q) {
                    errs.push(FieldError::new("governance.rho0_ratio", "must lie in [0, 1]"));
                }
            }
        }

        if let Some((l1, l2)) = self.lambda_pair {
            if !(l1 >= 0.0 && l1 < l2 && l2.is_finite()) {
                errs.push(FieldError::new("synergy.lambda_pair", "need 0 <= lambda1 < lambda2"));
            }
        }
        if let Some((c1, c2)) = self.cm_pair {
            if !(0.0 <= c2 && c2 < c1 && c1 < 1.0) {
                errs.push(FieldError::new("synergy.cm_pair", "need 0 <= c_m^2 < c_m^1 < 1"));
            }
        }

        if self.trials == 0 {
            errs.push(FieldError::new("run.trials", "must be at least 1"));
        }
        if !(self.series.tail_tol > 0.0) {
            errs.push(FieldError::new("series.tail_tol", "must be positive"));
        }
        if self.series.max_terms <= self.market.surplus_deals() {
            errs.push(FieldError::new("series.max_terms", "must be at least m + 1"));
        }
        errs
    }

    /// Explicit rate pair, or the first and last grid rates.
    pub fn lambda_pair(&self) -> (f64, f64) {
        self.lambda_pair.unwrap_or_else(|| {
            (
                self.lambda.first().copied().unwrap_or(0.0),
                self.lambda.last().copied().unwrap_or(0.0),
            )
        })
    }

    /// Explicit governance pair, or the largest and smallest grid levels.
    pub fn cm_pair(&self) -> (f64, f64) {
        self.cm_pair.unwrap_or_else(|| {
            (
                self.c_m.last().copied().unwrap_or(0.0),
                self.c_m.first().copied().unwrap_or(0.0),
            )
        })
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.check();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}
