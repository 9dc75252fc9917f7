//! Open auction at the sale date: noise-trader arrivals, belief sampling,
//! the equilibrium price schedule of the sequential deals, and a brute-force
//! unilateral-deviation oracle for that schedule.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, FieldError, Result};
use crate::firm_model::Valuation;
use crate::rng::{rng_from_seed, TrialRng};

/// Largest instance the deviation oracle accepts.
pub const ORACLE_MAX_TRADERS: usize = 8;
pub const ORACLE_MAX_DEALS: usize = 6;

/// Auction-side parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Noise-trader arrival rate.
    pub lambda: f64,
    /// Interval between the previous transaction and the sale date.
    pub delta_t: f64,
    pub n_informed: usize,
    /// Number of deals the seller must conclude.
    pub m_deals: usize,
    pub n_shares_per_deal: u32,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta_t: 1.0,
            n_informed: 2,
            m_deals: 3,
            n_shares_per_deal: 1,
        }
    }
}

impl MarketParams {
    /// Mean number of noise-trader arrivals, `lambda * delta_t`.
    pub fn mean_arrivals(&self) -> f64 {
        self.lambda * self.delta_t
    }

    /// Deals left once every informed trader has bought, `M - N_I`.
    pub fn surplus_deals(&self) -> usize {
        self.m_deals.saturating_sub(self.n_informed)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    pub fn check(&self, prefix: &str) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let p = |name: &str| format!("{prefix}{name}");
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            errs.push(FieldError::new(p("lambda"), "must be a finite non-negative rate"));
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            errs.push(FieldError::new(p("delta_t"), "must be positive"));
        }
        if self.m_deals < 1 {
            errs.push(FieldError::new(p("m_deals"), "must be at least 1"));
        }
        if self.n_shares_per_deal < 1 {
            errs.push(FieldError::new(p("n_shares"), "must be at least 1"));
        }
        if self.m_deals < self.n_informed {
            errs.push(FieldError::new(
                p("m_deals"),
                format!(
                    "must be at least n_informed = {} (heavy selling pressure, M >= N_I)",
                    self.n_informed
                ),
            ));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.check("market.");
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Every trader's valuation of one share at the sale date.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefProfile {
    /// `V(rho)`, shared by all informed traders.
    pub informed_value: f64,
    /// One estimate per arrived noise trader.
    pub noise_estimates: Vec<f64>,
    pub floor: f64,
    pub ceiling: f64,
}

impl BeliefProfile {
    /// All estimates: `n_informed` copies of the informed value, then the noise estimates.
    pub fn estimates(&self, n_informed: usize) -> Vec<f64> {
        let mut all = Vec::with_capacity(n_informed + self.noise_estimates.len());
        all.extend(std::iter::repeat_n(self.informed_value, n_informed));
        all.extend_from_slice(&self.noise_estimates);
        all
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.floor <= self.ceiling) {
            errs.push(FieldError::new("beliefs.floor", "must not exceed the ceiling"));
        }
        if !(self.floor <= self.informed_value && self.informed_value <= self.ceiling) {
            errs.push(FieldError::new("beliefs.informed_value", "must lie in [floor, ceiling]"));
        }
        if let Some(i) = self
            .noise_estimates
            .iter()
            .position(|v| !(*v >= self.floor && *v <= self.ceiling))
        {
            errs.push(FieldError::new(
                format!("beliefs.noise_estimates[{i}]"),
                "must lie in [floor, ceiling]",
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    /// Per-share price of each concluded deal, in deal order.
    pub deal_prices: Vec<f64>,
    /// Price of the last deal.
    pub final_price: f64,
    /// Set when the seller had to quote the floor to outside buyers.
    pub floor_triggered: bool,
}

pub(crate) fn draw_arrivals(market: &MarketParams, rng: &mut TrialRng) -> usize {
    let mean = market.mean_arrivals();
    if mean <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mean).expect("positive finite Poisson mean");
    let n: f64 = poisson.sample(rng);
    n as usize
}

pub(crate) fn draw_uniforms(count: usize, floor: f64, ceiling: f64, rng: &mut TrialRng) -> Vec<f64> {
    let width = ceiling - floor;
    (0..count)
        .map(|_| {
            if width == 0.0 {
                floor
            } else {
                floor + width * rng.random::<f64>()
            }
        })
        .collect()
}

/// Number of noise traders arriving before the sale, Poisson(`lambda * delta_t`).
pub fn sample_arrivals(market: &MarketParams, rng_seed: u64) -> usize {
    draw_arrivals(market, &mut rng_from_seed(rng_seed))
}

/// `count` independent uniform estimates on `[floor, ceiling]`.
pub fn sample_noise_beliefs(count: usize, floor: f64, ceiling: f64, rng_seed: u64) -> Result<Vec<f64>> {
    if !(floor <= ceiling) {
        return Err(Error::domain(format!("floor {floor} exceeds ceiling {ceiling}")));
    }
    Ok(draw_uniforms(count, floor, ceiling, &mut rng_from_seed(rng_seed)))
}

/// Equilibrium deal schedule of the open auction.
///
/// With the `N` estimates sorted in non-increasing order (ties counted with
/// multiplicity), deal `k` clears at the `(k+1)`-th largest estimate for
/// `k <= min(N-1, M)`. When `N <= M` the remaining deals clear at the floor.
pub fn equilibrium_price(beliefs: &BeliefProfile, market: &MarketParams) -> AuctionOutcome {
    let mut sorted = beliefs.estimates(market.n_informed);
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    let m = market.m_deals;

    let priced = m.min(n.saturating_sub(1));
    let mut deal_prices = Vec::with_capacity(m);
    deal_prices.extend(sorted.iter().skip(1).take(priced));
    let floor_triggered = n <= m;
    deal_prices.resize(m, beliefs.floor);

    AuctionOutcome {
        final_price: deal_prices.last().copied().unwrap_or(beliefs.floor),
        deal_prices,
        floor_triggered,
    }
}

/// One complete auction at the sale date: arrivals, beliefs, equilibrium.
pub fn run_auction_trial(valuation: &Valuation, market: &MarketParams, rng_seed: u64) -> Result<AuctionOutcome> {
    if !(valuation.floor <= valuation.ceiling) {
        return Err(Error::domain("valuation floor exceeds ceiling"));
    }
    let mut rng = rng_from_seed(rng_seed);
    let n_u = draw_arrivals(market, &mut rng);
    let beliefs = BeliefProfile {
        informed_value: valuation.fair,
        noise_estimates: draw_uniforms(n_u, valuation.floor, valuation.ceiling, &mut rng),
        floor: valuation.floor,
        ceiling: valuation.ceiling,
    };
    Ok(equilibrium_price(&beliefs, market))
}

/// Who takes the shares of one deal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Buyer {
    /// Index into the estimate list (informed traders first).
    Trader(usize),
    /// An outside noise trader attracted by the seller's ask at the floor.
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deal {
    pub buyer: Buyer,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// No unilateral deviation on the bid grid strictly raises any trader's believed profit.
    Confirmed { outcome: AuctionOutcome },
    Counterexample {
        /// 1-based deal index.
        deal: usize,
        trader: usize,
        deviation_bid: f64,
        /// Believed profit gained by deviating (currency, for the whole deal).
        gain: f64,
    },
}

impl Verdict {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, Verdict::Confirmed { .. })
    }
}

fn check_scale(n: usize, market: &MarketParams, step: f64) -> Result<()> {
    if n > ORACLE_MAX_TRADERS || market.m_deals > ORACLE_MAX_DEALS {
        return Err(Error::OracleScale(format!(
            "N = {n}, M = {} (limits N <= {ORACLE_MAX_TRADERS}, M <= {ORACLE_MAX_DEALS})",
            market.m_deals
        )));
    }
    if !(step > 0.0) {
        return Err(Error::domain("bid grid step must be positive"));
    }
    Ok(())
}

/// Plays the deals one by one: the highest remaining estimate buys at the
/// next-highest remaining estimate; a lone trader buys at the floor; with no
/// traders left the seller sells at the floor to outside buyers.
pub fn simulate_deals(beliefs: &BeliefProfile, market: &MarketParams) -> Vec<Deal> {
    let est = beliefs.estimates(market.n_informed);
    let mut remaining: Vec<usize> = (0..est.len()).collect();
    let mut deals = Vec::with_capacity(market.m_deals);
    for _ in 0..market.m_deals {
        match remaining.len() {
            0 => deals.push(Deal {
                buyer: Buyer::Outside,
                price: beliefs.floor,
            }),
            1 => deals.push(Deal {
                buyer: Buyer::Trader(remaining.pop().unwrap()),
                price: beliefs.floor,
            }),
            _ => {
                // first index wins ties
                let mut best = 0;
                for (pos, &i) in remaining.iter().enumerate() {
                    if est[i] > est[remaining[best]] {
                        best = pos;
                    }
                }
                let winner = remaining.remove(best);
                let price = remaining.iter().map(|&i| est[i]).fold(f64::NEG_INFINITY, f64::max);
                deals.push(Deal {
                    buyer: Buyer::Trader(winner),
                    price,
                });
            }
        }
    }
    deals
}

fn bid_grid(est: &[f64], floor: f64, ceiling: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let b = floor + i as f64 * step;
        if b > ceiling {
            break;
        }
        grid.push(b);
        i += 1;
    }
    grid.push(ceiling);
    for &v in est {
        grid.extend([v - step, v, v + step]);
    }
    grid.retain(|b| *b >= floor && *b <= ceiling);
    grid.sort_unstable_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Checks an arbitrary deal schedule for profitable unilateral deviations.
///
/// Each deal is treated as its own open auction among the traders who have not
/// yet bought (traders do not know how many deals follow). A non-buyer who bids
/// above the standing price takes the deal at his bid; the buyer keeps the deal
/// at a lower bid only while no rival values the share above that bid, and never
/// below the floor. Believed profit is `n * (estimate - price)` for a purchase and
/// zero otherwise; a trader does not buy at a price equal to his own estimate.
pub fn check_deal_schedule(
    beliefs: &BeliefProfile,
    market: &MarketParams,
    schedule: &[Deal],
    bid_grid_step: f64,
) -> Result<Verdict> {
    let est = beliefs.estimates(market.n_informed);
    check_scale(est.len(), market, bid_grid_step)?;
    if schedule.len() != market.m_deals {
        return Err(Error::domain(format!(
            "schedule has {} deals, market requires {}",
            schedule.len(),
            market.m_deals
        )));
    }
    let n = f64::from(market.n_shares_per_deal);
    let tol = 1e-12 * beliefs.ceiling.abs().max(1.0);
    let grid = bid_grid(&est, beliefs.floor, beliefs.ceiling, bid_grid_step);

    let mut remaining: Vec<usize> = (0..est.len()).collect();
    for (k, deal) in schedule.iter().enumerate() {
        let p = deal.price;
        let buyer = match deal.buyer {
            Buyer::Trader(i) => {
                if !remaining.contains(&i) {
                    return Err(Error::domain(format!("trader {i} buys twice or does not exist")));
                }
                Some(i)
            }
            Buyer::Outside => None,
        };
        for &j in &remaining {
            let value = est[j];
            if Some(j) == buyer {
                let current = n * (value - p);
                let best_rival = remaining
                    .iter()
                    .filter(|&&i| i != j)
                    .map(|&i| est[i])
                    .fold(beliefs.floor, f64::max);
                for &b in &grid {
                    let deviated = if b < p {
                        if b >= best_rival {
                            n * (value - b)
                        } else {
                            0.0
                        }
                    } else {
                        n * (value - b)
                    };
                    if deviated > current + tol {
                        return Ok(Verdict::Counterexample {
                            deal: k + 1,
                            trader: j,
                            deviation_bid: b,
                            gain: deviated - current,
                        });
                    }
                }
            } else {
                for &b in grid.iter().filter(|&&b| b > p) {
                    let gain = n * (value - b);
                    if gain > tol {
                        return Ok(Verdict::Counterexample {
                            deal: k + 1,
                            trader: j,
                            deviation_bid: b,
                            gain,
                        });
                    }
                }
            }
        }
        if let Some(i) = buyer {
            remaining.retain(|&r| r != i);
        }
    }

    let deal_prices: Vec<f64> = schedule.iter().map(|d| d.price).collect();
    let floor_triggered = est.len() <= market.m_deals;
    Ok(Verdict::Confirmed {
        outcome: AuctionOutcome {
            final_price: deal_prices.last().copied().unwrap_or(beliefs.floor),
            deal_prices,
            floor_triggered,
        },
    })
}

/// Simulates the deal sequence under the equilibrium bid profile and scans every
/// unilateral deviation on a bid grid of resolution `bid_grid_step` (plus every
/// estimate and its neighbours one step away). Confirmation is therefore up to
/// grid resolution.
pub fn brute_force_equilibrium_check(
    beliefs: &BeliefProfile,
    market: &MarketParams,
    bid_grid_step: f64,
) -> Result<Verdict> {
    check_scale(market.n_informed + beliefs.noise_estimates.len(), market, bid_grid_step)?;
    let schedule = simulate_deals(beliefs, market);
    check_deal_schedule(beliefs, market, &schedule, bid_grid_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(informed: f64, noise: &[f64], floor: f64, ceiling: f64) -> BeliefProfile {
        BeliefProfile {
            informed_value: informed,
            noise_estimates: noise.to_vec(),
            floor,
            ceiling,
        }
    }

    fn market(n_informed: usize, m_deals: usize) -> MarketParams {
        MarketParams {
            n_informed,
            m_deals,
            ..MarketParams::default()
        }
    }

    #[test]
    fn price_is_order_statistic_when_demand_exceeds_deals() {
        let b = profile(10.0, &[9.0, 8.0, 7.0], 5.0, 10.0);
        let out = equilibrium_price(&b, &market(1, 2));
        assert_eq!(out.deal_prices, vec![9.0, 8.0]);
        assert_eq!(out.final_price, 8.0);
        assert!(!out.floor_triggered);
    }

    #[test]
    fn price_hits_floor_when_traders_equal_deals() {
        let b = profile(10.0, &[9.0], 5.0, 10.0);
        let out = equilibrium_price(&b, &market(1, 2));
        assert_eq!(out.deal_prices, vec![9.0, 5.0]);
        assert_eq!(out.final_price, 5.0);
        assert!(out.floor_triggered);
    }

    #[test]
    fn no_noise_traders_gives_floor() {
        let b = profile(9.0, &[], 5.0, 10.0);
        let out = equilibrium_price(&b, &market(3, 3));
        assert_eq!(out.final_price, 5.0);
        let empty = equilibrium_price(&b, &market(0, 2));
        assert_eq!(empty.deal_prices, vec![5.0, 5.0]);
        assert!(empty.floor_triggered);
    }

    #[test]
    fn ties_count_with_multiplicity() {
        let b = profile(9.0, &[10.0, 7.0], 5.0, 10.0);
        let m = market(2, 2);
        let out = equilibrium_price(&b, &m);
        assert_eq!(out.final_price, 9.0);
        assert!(brute_force_equilibrium_check(&b, &m, 0.05).unwrap().is_confirmed());
    }

    #[test]
    fn oracle_confirms_textbook_instance() {
        let b = profile(10.0, &[9.0, 8.0, 7.0], 5.0, 10.0);
        let m = market(1, 2);
        match brute_force_equilibrium_check(&b, &m, 0.05).unwrap() {
            Verdict::Confirmed { outcome } => assert_eq!(outcome, equilibrium_price(&b, &m)),
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn oracle_single_bidder() {
        let b = profile(8.0, &[], 5.0, 10.0);
        let m = market(1, 1);
        match brute_force_equilibrium_check(&b, &m, 0.05).unwrap() {
            Verdict::Confirmed { outcome } => {
                assert_eq!(outcome.final_price, 5.0);
                assert!(outcome.floor_triggered);
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn oracle_detects_underpriced_last_deal() {
        let b = profile(10.0, &[9.0, 8.0, 7.0], 5.0, 10.0);
        let m = market(1, 2);
        let mut schedule = simulate_deals(&b, &m);
        schedule[1].price = 7.5;
        match check_deal_schedule(&b, &m, &schedule, 0.05).unwrap() {
            Verdict::Counterexample {
                deal,
                trader,
                deviation_bid,
                ..
            } => {
                assert_eq!(deal, 2);
                // the trader valuing the share at 8
                assert_eq!(trader, 2);
                assert!(deviation_bid > 7.5 && deviation_bid < 8.0);
            }
            v => panic!("expected counterexample, got {v:?}"),
        }
    }

    #[test]
    fn oracle_detects_overpriced_deal() {
        let b = profile(10.0, &[9.0, 8.0, 7.0], 5.0, 10.0);
        let m = market(1, 2);
        let mut schedule = simulate_deals(&b, &m);
        schedule[0].price = 9.5;
        assert!(!check_deal_schedule(&b, &m, &schedule, 0.05).unwrap().is_confirmed());
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let b = profile(10.0, &[9.0; 8], 5.0, 10.0);
        assert!(matches!(
            brute_force_equilibrium_check(&b, &market(1, 2), 0.05),
            Err(Error::OracleScale(_))
        ));
        let small = profile(10.0, &[9.0], 5.0, 10.0);
        assert!(matches!(
            brute_force_equilibrium_check(&small, &market(1, 7), 0.05),
            Err(Error::OracleScale(_))
        ));
    }

    #[test]
    fn beliefs_reject_inverted_interval() {
        assert!(sample_noise_beliefs(3, 2.0, 1.0, 0).is_err());
        let v = sample_noise_beliefs(5, 3.0, 3.0, 9).unwrap();
        assert!(v.iter().all(|x| *x == 3.0));
    }

    #[test]
    fn zero_rate_has_no_arrivals() {
        let m = MarketParams {
            lambda: 0.0,
            ..MarketParams::default()
        };
        assert!((0..100).all(|s| sample_arrivals(&m, s) == 0));
    }

    #[test]
    fn market_requires_heavy_selling_pressure() {
        assert!(market(3, 2).validate().is_err());
        assert!(market(2, 2).validate().is_ok());
    }
}
