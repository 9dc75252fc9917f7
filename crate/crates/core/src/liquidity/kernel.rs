//! The probability kernel `K(g, L)`: the chance that at most `m` of
//! `N_U ~ Poisson(L)` noise estimates clear the discount threshold, each
//! independently with probability `1 - g`.
//!
//! Two routes are provided. [`k_series`] sums the Poisson-mixed binomial
//! double series term by term; [`k_closed_form`] uses Poisson thinning, under
//! which the count of clearing estimates is itself Poisson with mean `L(1-g)`.

use crate::error::{Error, Result};

/// Truncation settings for the infinite outer sum of [`k_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Absolute bound on the discarded Poisson tail mass.
    pub tail_tol: f64,
    /// Hard cap on the number of outer-index terms.
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            tail_tol: 1e-12,
            max_terms: 1_000_000,
        }
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(k!)`: direct product up to 170, Stirling series beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k <= 170 {
        let mut p = 1.0f64;
        for i in 2..=k {
            p *= i as f64;
        }
        return p.ln();
    }
    let n = (k + 1) as f64;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (n - 0.5) * n.ln() - n + LN_SQRT_2PI + series
}

fn check_args(g: f64, l: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::domain(format!("g = {g} is not a probability")));
    }
    if !(l >= 0.0 && l.is_finite()) {
        return Err(Error::domain(format!("L = {l} must be finite and non-negative")));
    }
    Ok(())
}

/// Poisson log-pmf `k ln(mu) - mu - ln k!`, with `0^0 = 1`.
fn ln_poisson_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

/// `K(g, L)` by literal summation of
/// `sum_{i<=m} L^i e^{-L}/i! + sum_{i>m} sum_{j<=m} L^i e^{-L} (1-g)^j g^{i-j} / (j!(i-j)!)`.
///
/// The outer sum stops once the remaining Poisson mass is below `ctl.tail_tol`;
/// the inner binomial factor never exceeds one, so that bounds the truncation error.
pub fn k_series(g: f64, l: f64, m: u64, ctl: &SeriesControl) -> Result<f64> {
    check_args(g, l)?;
    if l == 0.0 {
        return Ok(1.0);
    }
    let ln_l = l.ln();
    let ln_q = (1.0 - g).ln(); // -inf at g = 1
    let ln_g = g.ln(); // -inf at g = 0

    let mut ln_fact: Vec<f64> = (0..=m).map(ln_factorial).collect();
    let ln_pois = |i: u64, lf: f64| i as f64 * ln_l - l - lf;

    let mut total: f64 = (0..=m).map(|i| ln_pois(i, ln_fact[i as usize]).exp()).sum();

    let mut i = m + 1;
    let mut outer_terms = 0usize;
    loop {
        if outer_terms >= ctl.max_terms {
            return Err(Error::Truncation { terms: outer_terms });
        }
        if ln_fact.len() <= i as usize {
            ln_fact.push(ln_factorial(i));
        }
        let lf_i = ln_fact[i as usize];
        let ln_p = ln_pois(i, lf_i);

        let mut binom = 0.0;
        for j in 0..=m {
            let a = if j == 0 { 0.0 } else { j as f64 * ln_q };
            let b = (i - j) as f64 * ln_g;
            let ln_term = lf_i - ln_fact[j as usize] - ln_fact[(i - j) as usize] + a + b;
            if ln_term.is_finite() {
                binom += (ln_p + ln_term).exp();
            }
        }
        total += binom;
        outer_terms += 1;

        // Tail beyond i: p_{i+1} / (1 - L/(i+2)) once the ratio L/(k+1) is below one.
        let next = (i + 1) as f64;
        if next + 1.0 > l {
            let ln_next = ln_p + ln_l - next.ln();
            let ratio = l / (next + 1.0);
            let bound = ln_next.exp() / (1.0 - ratio);
            if bound < ctl.tail_tol {
                break;
            }
        }
        i += 1;
    }
    Ok(total)
}

/// `K` together with its complement and logarithm, each evaluated without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    /// `1 - K`, the Poisson upper tail beyond `m`.
    pub complement: f64,
    /// `ln K`.
    pub ln_value: f64,
}

/// Poisson CDF at `m` with mean `mu` plus its upper tail, in log space.
pub fn poisson_cdf_parts(m: u64, mu: f64) -> KernelValue {
    if mu == 0.0 {
        return KernelValue {
            value: 1.0,
            complement: 0.0,
            ln_value: 0.0,
        };
    }
    let ln_mu = mu.ln();
    let terms: Vec<f64> = (0..=m)
        .map(|k| k as f64 * ln_mu - ln_factorial(k))
        .collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
    let ln_lower = peak + scaled.ln() - mu;
    let lower = ln_lower.exp();
    if lower < 0.5 {
        return KernelValue {
            value: lower,
            complement: 1.0 - lower,
            ln_value: ln_lower,
        };
    }
    // Upper tail by forward recurrence; mu < m + 1 here so the ratios mu/(k+1) stay below one.
    let mut ln_term = ln_poisson_pmf(m + 1, mu);
    let mut upper = 0.0;
    let mut k = m + 1;
    loop {
        let t = ln_term.exp();
        upper += t;
        if t <= upper * 1e-18 || t == 0.0 {
            break;
        }
        k += 1;
        ln_term += ln_mu - (k as f64).ln();
    }
    KernelValue {
        value: 1.0 - upper,
        complement: upper,
        ln_value: (-upper).ln_1p(),
    }
}

/// `K(g, L)` via Poisson thinning: the Poisson CDF at `m` with mean `L(1-g)`.
pub fn k_closed_form(g: f64, l: f64, m: u64) -> Result<f64> {
    Ok(kernel_parts(g, l, m)?.value)
}

/// [`k_closed_form`] with complement and logarithm.
pub fn kernel_parts(g: f64, l: f64, m: u64) -> Result<KernelValue> {
    check_args(g, l)?;
    Ok(poisson_cdf_parts(m, l * (1.0 - g)))
}

/// `L^m (1-g)^m e^{-L(1-g)} / m!`, the Poisson pmf at `m` of the thinned mean.
fn thinned_pmf(g: f64, l: f64, m: u64) -> f64 {
    ln_poisson_pmf(m, l * (1.0 - g)).exp()
}

/// `dK/dL = -L^m (1-g)^{m+1} e^{-L(1-g)} / m!`.
pub fn dk_dl(g: f64, l: f64, m: u64) -> Result<f64> {
    check_args(g, l)?;
    Ok(-(1.0 - g) * thinned_pmf(g, l, m))
}

/// `dK/dg = L^{m+1} (1-g)^m e^{-L(1-g)} / m!`.
pub fn dk_dg(g: f64, l: f64, m: u64) -> Result<f64> {
    check_args(g, l)?;
    Ok(l * thinned_pmf(g, l, m))
}

/// `d2K/dg dL = [(m+1) - L(1-g)] L^m (1-g)^m e^{-L(1-g)} / m!`.
pub fn d2k_dg_dl(g: f64, l: f64, m: u64) -> Result<f64> {
    check_args(g, l)?;
    Ok(((m + 1) as f64 - l * (1.0 - g)) * thinned_pmf(g, l, m))
}

/// `K K_{gL} - K_L K_g`, positive whenever `g < 1` and `L > 0`.
pub fn synergy_kernel(g: f64, l: f64, m: u64) -> Result<f64> {
    let k = k_closed_form(g, l, m)?;
    Ok(k * d2k_dg_dl(g, l, m)? - dk_dl(g, l, m)? * dk_dg(g, l, m)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_factorial_matches_products_and_stirling_join() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), max_relative = 1e-15);
        // across the switch: ln(171!) - ln(170!) = ln 171
        assert_relative_eq!(ln_factorial(171) - ln_factorial(170), 171f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(ln_factorial(1001) - ln_factorial(1000), 1001f64.ln(), max_relative = 1e-11);
    }

    #[test]
    fn zero_rate_is_certain() {
        let ctl = SeriesControl::default();
        for m in [0, 3, 10] {
            assert_eq!(k_series(0.3, 0.0, m, &ctl).unwrap(), 1.0);
            assert_eq!(k_closed_form(0.3, 0.0, m).unwrap(), 1.0);
        }
    }

    #[test]
    fn g_one_is_certain() {
        let ctl = SeriesControl::default();
        for (l, m) in [(0.5, 0), (4.0, 2), (30.0, 5)] {
            assert!((k_series(1.0, l, m, &ctl).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(k_closed_form(1.0, l, m).unwrap(), 1.0);
        }
    }

    #[test]
    fn g_zero_is_poisson_cdf() {
        let ctl = SeriesControl::default();
        let expected = (-2f64).exp() * 3.0;
        assert_relative_eq!(k_closed_form(0.0, 2.0, 1).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(k_series(0.0, 2.0, 1, &ctl).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(k_closed_form(0.0, 2.0, 1).unwrap(), 0.406_006, epsilon = 1e-6);
    }

    #[test]
    fn hand_derivatives() {
        let e1 = (-1f64).exp();
        assert_relative_eq!(dk_dl(0.0, 1.0, 0).unwrap(), -e1, max_relative = 1e-15);
        assert_relative_eq!(dk_dg(0.0, 1.0, 0).unwrap(), e1, max_relative = 1e-15);
        assert_eq!(dk_dl(1.0, 3.0, 2).unwrap(), 0.0);
        assert_eq!(dk_dg(0.4, 0.0, 2).unwrap(), 0.0);
        assert!(dk_dl(0.4, 0.0, 0).unwrap() < 0.0);
    }

    #[test]
    fn complement_is_accurate_deep_in_the_tail() {
        // P(N >= 11) for mean 0.15: leading term dominates.
        let parts = poisson_cdf_parts(10, 0.15);
        let lead = (11.0 * 0.15f64.ln() - 0.15 - ln_factorial(11)).exp();
        assert!(parts.complement > lead && parts.complement < lead * 1.02);
        assert_relative_eq!(parts.ln_value, -parts.complement, max_relative = 1e-12);
    }

    #[test]
    fn large_mean_stays_finite_in_log_space() {
        let parts = kernel_parts(0.0, 1000.0, 5).unwrap();
        assert_eq!(parts.value, 0.0);
        assert!(parts.ln_value.is_finite() && parts.ln_value < -900.0);
    }

    #[test]
    fn truncation_cap_is_reported() {
        let ctl = SeriesControl {
            tail_tol: 1e-12,
            max_terms: 3,
        };
        assert!(matches!(k_series(0.5, 50.0, 1, &ctl), Err(Error::Truncation { .. })));
    }

    #[test]
    fn bad_arguments() {
        assert!(k_closed_form(1.5, 1.0, 0).is_err());
        assert!(k_closed_form(0.5, -1.0, 0).is_err());
        assert!(dk_dg(-0.1, 1.0, 0).is_err());
    }
}
