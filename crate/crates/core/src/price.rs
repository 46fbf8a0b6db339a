//! Closed-form valuation of S-forwards, longevity swaps, caplets, caps,
//! floorlets and life annuities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::normal_cdf;
use crate::model::{
    integral_moments, survival_probability, CohortState, MarketParams, Measure, ModelParams,
};

/// Below this variance the caplet collapses to its intrinsic value.
pub const DETERMINISTIC_VARIANCE: f64 = 1e-14;

pub fn discount(market: &MarketParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param(
            "t",
            format!("discounting needs t >= 0, got {t}"),
        ));
    }
    Ok(market.discount(t))
}

fn check_strike(strike: f64) -> Result<()> {
    if !(0.0..1.0).contains(&strike) {
        return Err(Error::param(
            "strike",
            format!("must lie in [0, 1), got {strike}"),
        ));
    }
    Ok(())
}

fn check_horizon(x: u32, maturity: f64, market: &MarketParams) -> Result<()> {
    if x as f64 + maturity > market.omega {
        return Err(Error::param(
            "maturity",
            format!(
                "age {x} at maturity {maturity} exceeds omega {}",
                market.omega
            ),
        ));
    }
    Ok(())
}

fn check_notional(notional: f64) -> Result<()> {
    if !notional.is_finite() {
        return Err(Error::param("notional", "must be finite"));
    }
    Ok(())
}

/// Swap rate of an S-forward: the risk-adjusted survival probability to `maturity`.
pub fn sforward_rate(
    x: u32,
    maturity: f64,
    params: &ModelParams,
    market: &MarketParams,
) -> Result<f64> {
    check_horizon(x, maturity, market)?;
    let state = CohortState::initial(params, x)?;
    survival_probability(&state, maturity, params, market.risk_adjusted())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SForwardSpec {
    pub x: u32,
    pub maturity: f64,
    pub strike: f64,
    pub notional: f64,
}

impl SForwardSpec {
    pub fn new(x: u32, maturity: f64, strike: f64, notional: f64) -> Result<Self> {
        let spec = SForwardSpec {
            x,
            maturity,
            strike,
            notional,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maturity >= 1.0) {
            return Err(Error::param(
                "maturity",
                format!("must be >= 1, got {}", self.maturity),
            ));
        }
        check_strike(self.strike)?;
        check_notional(self.notional)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapletSpec {
    pub x: u32,
    pub maturity: f64,
    pub strike: f64,
    pub notional: f64,
}

impl CapletSpec {
    pub fn new(x: u32, maturity: f64, strike: f64, notional: f64) -> Result<Self> {
        let spec = CapletSpec {
            x,
            maturity,
            strike,
            notional,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::param(
                "maturity",
                format!("must be positive, got {}", self.maturity),
            ));
        }
        check_strike(self.strike)?;
        check_notional(self.notional)
    }
}

/// Strip of instruments paying at `1, 2, ..., strikes.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub x: u32,
    /// `strikes[k]` applies to maturity `k + 1`.
    pub strikes: Vec<f64>,
    pub notional: f64,
}

pub type SwapSpec = Strip;
pub type CapSpec = Strip;

impl Strip {
    pub fn new(x: u32, strikes: Vec<f64>, notional: f64) -> Result<Self> {
        if strikes.is_empty() {
            return Err(Error::param("strikes", "need at least one maturity"));
        }
        for &k in &strikes {
            check_strike(k)?;
        }
        check_notional(notional)?;
        Ok(Strip {
            x,
            strikes,
            notional,
        })
    }

    /// Strikes equal to the swap rates, so the swap is worth zero at inception.
    pub fn at_swap_rates(
        x: u32,
        t_hat: u32,
        notional: f64,
        params: &ModelParams,
        market: &MarketParams,
    ) -> Result<Self> {
        let strikes = (1..=t_hat)
            .map(|t| sforward_rate(x, t as f64, params, market))
            .collect::<Result<Vec<_>>>()?;
        Strip::new(x, strikes, notional)
    }

    /// Strikes equal to the real-world ("best estimate") survival probabilities.
    pub fn at_best_estimate(
        x: u32,
        t_hat: u32,
        notional: f64,
        params: &ModelParams,
    ) -> Result<Self> {
        let state = CohortState::initial(params, x)?;
        let strikes = (1..=t_hat)
            .map(|t| survival_probability(&state, t as f64, params, Measure::RealWorld))
            .collect::<Result<Vec<_>>>()?;
        Strip::new(x, strikes, notional)
    }

    pub fn maturities(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.strikes
            .iter()
            .enumerate()
            .map(|(k, &s)| ((k + 1) as f64, s))
    }
}

/// Everything observable at valuation time `state.t`.
#[derive(Debug, Clone, Copy)]
pub struct ValuationContext<'a> {
    /// Survivor index `S̄_x(0, t)`.
    pub realized_survival: f64,
    pub state: CohortState,
    pub params: &'a ModelParams,
    pub market: &'a MarketParams,
}

impl<'a> ValuationContext<'a> {
    pub fn new(
        realized_survival: f64,
        state: CohortState,
        params: &'a ModelParams,
        market: &'a MarketParams,
    ) -> Result<Self> {
        if !(realized_survival > 0.0 && realized_survival <= 1.0) {
            return Err(Error::param(
                "realized_survival",
                format!("must lie in (0, 1], got {realized_survival}"),
            ));
        }
        if state.t == 0.0 && realized_survival != 1.0 {
            return Err(Error::param("realized_survival", "must equal 1 at t = 0"));
        }
        Ok(ValuationContext {
            realized_survival,
            state,
            params,
            market,
        })
    }

    pub fn inception(params: &'a ModelParams, market: &'a MarketParams, x: u32) -> Result<Self> {
        ValuationContext::new(1.0, CohortState::initial(params, x)?, params, market)
    }

    fn check_cohort(&self, x: u32) -> Result<()> {
        if x != self.state.x {
            return Err(Error::param(
                "x",
                format!(
                    "instrument cohort {x} differs from valuation cohort {}",
                    self.state.x
                ),
            ));
        }
        Ok(())
    }

    fn bond(&self, maturity: f64) -> f64 {
        self.market.discount(maturity - self.state.t)
    }

    /// `S̄_x(0,t) · S̃_{x+t}(t,T)` and the risk-adjusted variance `Γ̃(t,T)`.
    fn forward_survival(&self, maturity: f64) -> Result<(f64, f64)> {
        check_horizon(self.state.x, maturity, self.market)?;
        let m = integral_moments(
            &self.state,
            maturity,
            self.params,
            self.market.risk_adjusted(),
        )?;
        let s = (0.5 * m.gamma_var - m.theta).exp();
        Ok((self.realized_survival * s, m.gamma_var))
    }
}

pub fn sforward_price(spec: &SForwardSpec, ctx: &ValuationContext) -> Result<f64> {
    spec.validate()?;
    ctx.check_cohort(spec.x)?;
    let (forward, _) = ctx.forward_survival(spec.maturity)?;
    Ok(spec.notional * ctx.bond(spec.maturity) * (forward - spec.strike))
}

/// Sum of the unexpired S-forwards of the swap.
pub fn swap_value(spec: &SwapSpec, ctx: &ValuationContext) -> Result<f64> {
    ctx.check_cohort(spec.x)?;
    let mut total = 0.0;
    for (maturity, strike) in spec.maturities().filter(|&(m, _)| m >= ctx.state.t) {
        let (forward, _) = ctx.forward_survival(maturity)?;
        total += ctx.bond(maturity) * (forward - strike);
    }
    Ok(spec.notional * total)
}

fn black_call(forward: f64, strike: f64, variance: f64) -> f64 {
    if variance < DETERMINISTIC_VARIANCE || forward <= 0.0 || strike <= 0.0 {
        return (forward - strike).max(0.0);
    }
    let vol = variance.sqrt();
    let d = ((strike / forward).ln() + 0.5 * variance) / vol;
    forward * normal_cdf(vol - d) - strike * normal_cdf(-d)
}

fn black_put(forward: f64, strike: f64, variance: f64) -> f64 {
    if variance < DETERMINISTIC_VARIANCE || forward <= 0.0 || strike <= 0.0 {
        return (strike - forward).max(0.0);
    }
    let vol = variance.sqrt();
    let d = ((strike / forward).ln() + 0.5 * variance) / vol;
    strike * normal_cdf(d) - forward * normal_cdf(d - vol)
}

/// Caplet on the survivor index: lognormal call on `S̄·S̃` with total variance `Γ̃`.
pub fn caplet_price(spec: &CapletSpec, ctx: &ValuationContext) -> Result<f64> {
    spec.validate()?;
    ctx.check_cohort(spec.x)?;
    let (forward, variance) = ctx.forward_survival(spec.maturity)?;
    Ok(spec.notional * ctx.bond(spec.maturity) * black_call(forward, spec.strike, variance))
}

/// Floorlet `max(K - index, 0)`; put counterpart of [`caplet_price`].
pub fn floorlet_price(spec: &CapletSpec, ctx: &ValuationContext) -> Result<f64> {
    spec.validate()?;
    ctx.check_cohort(spec.x)?;
    let (forward, variance) = ctx.forward_survival(spec.maturity)?;
    Ok(spec.notional * ctx.bond(spec.maturity) * black_put(forward, spec.strike, variance))
}

pub fn cap_price(spec: &CapSpec, ctx: &ValuationContext) -> Result<f64> {
    ctx.check_cohort(spec.x)?;
    let mut total = 0.0;
    for (maturity, strike) in spec.maturities().filter(|&(m, _)| m >= ctx.state.t) {
        let (forward, variance) = ctx.forward_survival(maturity)?;
        total += ctx.bond(maturity) * black_call(forward, strike, variance);
    }
    Ok(spec.notional * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Moneyness {
    InTheMoney,
    AtTheMoney,
    OutOfTheMoney,
}

pub fn caplet_moneyness(spec: &CapletSpec, ctx: &ValuationContext) -> Result<Moneyness> {
    let (forward, _) = ctx.forward_survival(spec.maturity)?;
    Ok(if spec.strike > forward {
        Moneyness::OutOfTheMoney
    } else if spec.strike < forward {
        Moneyness::InTheMoney
    } else {
        Moneyness::AtTheMoney
    })
}

/// Whole-life annuity of 1 per year in arrears, priced under the risk-adjusted measure.
pub fn annuity_price(x: u32, params: &ModelParams, market: &MarketParams) -> Result<f64> {
    let remaining = market.omega - x as f64;
    if !(remaining > 0.0) {
        return Err(Error::param(
            "x",
            format!("age {x} must be below omega {}", market.omega),
        ));
    }
    let state = CohortState::initial(params, x)?;
    let last = remaining.floor() as u32;
    let mut total = 0.0;
    for t in 1..=last {
        let t = t as f64;
        total +=
            market.discount(t) * survival_probability(&state, t, params, market.risk_adjusted())?;
    }
    Ok(total)
}
