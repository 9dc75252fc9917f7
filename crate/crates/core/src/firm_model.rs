//! Representative firm: agency-cost choice of the controlling community,
//! optimal capital, the per-share cash-flow process `X_t` and per-share
//! values under any believed agency cost.

use crate::error::{Error, FieldError, Result};

/// Production, discounting and share parameters of the representative firm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmParams {
    /// Output elasticity of capital, in (0, 1).
    pub alpha: f64,
    /// Capital depreciation rate.
    pub delta: f64,
    /// Borrowing rate.
    pub r: f64,
    /// Drift of the technology-cost state `Z`.
    pub mu_z: f64,
    /// Volatility of `Z`.
    pub sigma_z: f64,
    /// Equity fraction held by the controlling community, in (0, 1].
    pub theta: f64,
    /// Outside investors' discount rate.
    pub gamma: f64,
    /// Total share count.
    pub s_total: f64,
    /// Initial state `Z_0`.
    pub z0: f64,
    /// Valuation time `T_2`.
    pub t_eval: f64,
    /// Realized Brownian value `W_{T_2}` at the valuation time.
    pub w_t: f64,
}

impl Default for FirmParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            delta: 0.05,
            r: 0.05,
            mu_z: 0.01,
            sigma_z: 0.2,
            theta: 0.4,
            gamma: 0.15,
            s_total: 1.0e6,
            z0: 1.0,
            t_eval: 1.0,
            w_t: 0.0,
        }
    }
}

impl FirmParams {
    /// Collects every violated invariant, field paths prefixed with `prefix`.
    pub fn check(&self, prefix: &str) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let p = |name: &str| format!("{prefix}{name}");
        let finite = [
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("r", self.r),
            ("mu_z", self.mu_z),
            ("sigma_z", self.sigma_z),
            ("theta", self.theta),
            ("gamma", self.gamma),
            ("s_total", self.s_total),
            ("z0", self.z0),
            ("t_eval", self.t_eval),
            ("w_t", self.w_t),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                errs.push(FieldError::new(p(name), "must be a finite number"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            errs.push(FieldError::new(p("alpha"), "must lie in (0, 1)"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            errs.push(FieldError::new(p("theta"), "must lie in (0, 1]"));
        }
        if !(self.s_total > 0.0) {
            errs.push(FieldError::new(p("s_total"), "must be positive"));
        }
        if !(self.z0 > 0.0) {
            errs.push(FieldError::new(p("z0"), "must be positive"));
        }
        if !(self.sigma_z >= 0.0) {
            errs.push(FieldError::new(p("sigma_z"), "must be non-negative"));
        }
        if !(self.r + self.delta > 0.0) {
            errs.push(FieldError::new(p("r"), "r + delta must be positive"));
        }
        if errs.is_empty() {
            let mu = self.x_drift();
            if !(self.gamma > mu) {
                errs.push(FieldError::new(
                    p("gamma"),
                    format!("gamma must exceed the derived drift mu = {mu} for the DCF integral to converge"),
                ));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.check("firm.");
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn x_drift(&self) -> f64 {
        let one_minus = 1.0 - self.alpha;
        self.mu_z / one_minus + 0.5 * self.sigma_z * self.sigma_z * self.alpha / (one_minus * one_minus)
    }
}

/// Penalty-scale function `f(c) = kappa * c^beta`.
///
/// Increasing and concave on [0, 1) with `f(0) = 0` for `kappa > 0`, `0 < beta <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyScale {
    pub kappa: f64,
    pub beta: f64,
}

impl Default for PenaltyScale {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            beta: 1.0,
        }
    }
}

impl PenaltyScale {
    pub fn eval(&self, c: f64) -> f64 {
        if c <= 0.0 {
            0.0
        } else {
            self.kappa * c.powf(self.beta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirmKind {
    /// Agency cost chosen endogenously by the controlling community.
    General(PenaltyScale),
    /// Entrenched controllers; the agency cost `rho0` is exogenous.
    Controlled { rho0: f64 },
}

impl FirmKind {
    pub fn label(&self) -> &'static str {
        match self {
            FirmKind::General(_) => "general",
            FirmKind::Controlled { .. } => "controlled",
        }
    }
}

/// Governance bound `c_m` together with the firm type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernanceSpec {
    pub c_m: f64,
    pub kind: FirmKind,
}

impl GovernanceSpec {
    pub fn general(c_m: f64, kappa: f64, beta: f64) -> Self {
        Self {
            c_m,
            kind: FirmKind::General(PenaltyScale { kappa, beta }),
        }
    }

    pub fn controlled(c_m: f64, rho0: f64) -> Self {
        Self {
            c_m,
            kind: FirmKind::Controlled { rho0 },
        }
    }

    /// Same firm type with a different governance bound.
    pub fn with_c_m(&self, c_m: f64) -> Self {
        Self { c_m, kind: self.kind }
    }

    pub fn check(&self, prefix: &str) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let p = |name: &str| format!("{prefix}{name}");
        if !(self.c_m >= 0.0 && self.c_m < 1.0) {
            errs.push(FieldError::new(p("c_m"), "must lie in [0, 1)"));
        }
        match self.kind {
            FirmKind::General(f) => {
                if !(f.kappa > 0.0 && f.kappa.is_finite()) {
                    errs.push(FieldError::new(p("kappa"), "must be positive"));
                }
                if !(f.beta > 0.0 && f.beta <= 1.0) {
                    errs.push(FieldError::new(
                        p("beta"),
                        "must lie in (0, 1] so that f is increasing and concave",
                    ));
                }
            }
            FirmKind::Controlled { rho0 } => {
                if !(rho0 >= 0.0) {
                    errs.push(FieldError::new(p("rho0"), "must be non-negative"));
                }
                if !(rho0 <= self.c_m) {
                    errs.push(FieldError::new(
                        p("rho0"),
                        format!("must not exceed c_m = {} (c_m >= rho0)", self.c_m),
                    ));
                }
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.check("governance.");
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Drift, volatility and initial value of the per-share cash-flow process `X_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XDynamics {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl XDynamics {
    /// `X_t = X_0 exp((mu - sigma^2/2) t + sigma w)` for a realized Brownian value `w`.
    pub fn value_at(&self, t: f64, w: f64) -> f64 {
        self.x0 * ((self.mu - 0.5 * self.sigma * self.sigma) * t + self.sigma * w).exp()
    }
}

/// Agency-cost share chosen by the controlling community.
///
/// General firms take the interior first-order solution `(1 - theta)/2 * f(c_m)`,
/// clamped to the feasible set `[0, c_m]`; controlled firms return `rho0`.
pub fn agency_cost_share(gov: &GovernanceSpec, firm: &FirmParams) -> f64 {
    match gov.kind {
        FirmKind::General(f) => {
            let interior = 0.5 * (1.0 - firm.theta) * f.eval(gov.c_m);
            interior.clamp(0.0, gov.c_m.max(0.0))
        }
        FirmKind::Controlled { rho0 } => rho0,
    }
}

/// Profit-maximizing capital `k* = (alpha/(r+delta))^{1/(1-alpha)} z^{1/(1-alpha)}`.
pub fn optimal_capital(firm: &FirmParams, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::domain(format!("state value z must be non-negative, got {z}")));
    }
    let expo = 1.0 / (1.0 - firm.alpha);
    Ok((firm.alpha / (firm.r + firm.delta)).powf(expo) * z.powf(expo))
}

/// Objective of the controlling community's share choice:
/// `rho + (1 - rho) theta - rho^2 / f(c_m)`.
pub fn controller_objective(rho: f64, gov: &GovernanceSpec, firm: &FirmParams) -> Result<f64> {
    let FirmKind::General(f) = gov.kind else {
        return Err(Error::domain("controller objective is defined for general-type firms only"));
    };
    if !(rho >= 0.0 && rho <= gov.c_m) {
        return Err(Error::domain(format!(
            "rho = {rho} outside the feasible set [0, {}]",
            gov.c_m
        )));
    }
    let fc = f.eval(gov.c_m);
    if fc == 0.0 {
        return Ok(if rho == 0.0 { firm.theta } else { f64::NEG_INFINITY });
    }
    Ok(rho + (1.0 - rho) * firm.theta - rho * rho / fc)
}

/// Drift, volatility and initial value of `X_t` by Ito's formula.
///
/// Fails when `gamma <= mu`: the discounted cash-flow integral diverges.
pub fn derive_x_dynamics(firm: &FirmParams) -> Result<XDynamics> {
    let one_minus = 1.0 - firm.alpha;
    let mu = firm.x_drift();
    let sigma = firm.sigma_z / one_minus;
    let x0 = (one_minus / firm.s_total)
        * (firm.alpha / (firm.r + firm.delta)).powf(firm.alpha / one_minus)
        * firm.z0.powf(1.0 / one_minus);
    if !(firm.gamma > mu) {
        return Err(Error::invalid(
            "firm.gamma",
            format!("gamma = {} must exceed the derived drift mu = {mu}", firm.gamma),
        ));
    }
    Ok(XDynamics { mu, sigma, x0 })
}

/// Per-share value at the valuation time for an investor who believes the
/// agency cost is `rho_hat`.
pub fn share_value(firm: &FirmParams, dynamics: &XDynamics, rho_hat: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho_hat) {
        return Err(Error::domain(format!("believed agency share {rho_hat} outside [0, 1)")));
    }
    if !(firm.gamma > dynamics.mu) {
        return Err(Error::domain(format!(
            "gamma = {} must exceed mu = {}",
            firm.gamma, dynamics.mu
        )));
    }
    let x_t = dynamics.value_at(firm.t_eval, firm.w_t);
    Ok((1.0 - rho_hat) / (firm.gamma - dynamics.mu) * x_t)
}

/// Per-share income advantage of the controlling community over outside
/// investors at the valuation time.
///
/// Computed as `(rho f - rho^2) / (theta f) * X_t`, which is
/// `(1 - theta^2) f(c_m) / (4 theta) * X_t` at the interior optimum.
pub fn benefit_of_control(firm: &FirmParams, gov: &GovernanceSpec, dynamics: &XDynamics) -> Result<f64> {
    let FirmKind::General(f) = gov.kind else {
        return Err(Error::domain("benefit of control is defined for general-type firms only"));
    };
    if !(firm.theta > 0.0) {
        return Err(Error::domain("theta must be positive (division by theta)"));
    }
    let fc = f.eval(gov.c_m);
    if fc == 0.0 {
        return Ok(0.0);
    }
    let rho = agency_cost_share(gov, firm);
    let x_t = dynamics.value_at(firm.t_eval, firm.w_t);
    Ok((rho * fc - rho * rho) / (firm.theta * fc) * x_t)
}

/// Maximum possible discount rate `(c_m - rho)/(1 - rho)`.
pub fn s_bar(gov: &GovernanceSpec, rho: f64) -> f64 {
    (gov.c_m - rho) / (1.0 - rho)
}

/// Per-share values that bracket every belief at the valuation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Valuation {
    /// Actual agency-cost share.
    pub rho: f64,
    /// `V(rho)`, the fair value known to informed traders.
    pub fair: f64,
    /// `V(c_m)`, the lowest value any trader can hold.
    pub floor: f64,
    /// `V(0)`, the no-agency-cost value.
    pub ceiling: f64,
}

pub fn valuation(firm: &FirmParams, gov: &GovernanceSpec) -> Result<Valuation> {
    let dynamics = derive_x_dynamics(firm)?;
    let rho = agency_cost_share(gov, firm);
    let ceiling = share_value(firm, &dynamics, 0.0)?;
    Ok(Valuation {
        rho,
        fair: share_value(firm, &dynamics, rho)?,
        floor: share_value(firm, &dynamics, gov.c_m)?,
        ceiling,
    })
}
