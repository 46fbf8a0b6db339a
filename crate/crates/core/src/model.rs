//! Closed-form moments of the integrated intensity and the resulting
//! survival probabilities under the real-world and risk-adjusted measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{growth_integral, ou_cross_integral};

/// The ten parameters of the two-factor Gaussian intensity model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma1: f64,
    /// Base volatility of factor 2; the age-`x` volatility is `sigma * e^{gamma x}`.
    pub sigma: f64,
    pub gamma: f64,
    pub rho: f64,
    pub alpha1: f64,
    /// Age slope of the factor-2 drift `alpha * x + beta`.
    pub alpha: f64,
    pub beta: f64,
    pub y1: f64,
    /// Initial factor-2 value keyed by initial cohort age.
    pub y2_by_age: BTreeMap<u32, f64>,
}

impl ModelParams {
    /// Parameters fitted to Australian male central death rates 1970–2008
    /// (cohorts aged 65 and 75 in 2008).
    pub fn australian_males_2008() -> Self {
        ModelParams {
            sigma1: 0.0022465,
            sigma: 0.0000002,
            gamma: 0.129832,
            rho: -0.795875,
            alpha1: 0.0017508,
            alpha: 0.0000615,
            beta: 0.120931,
            y1: 0.0021277,
            y2_by_age: BTreeMap::from([(65, 0.0084923), (75, 0.0294695)]),
        }
    }

    pub fn validate(&self, omega: f64) -> Result<()> {
        let finite = [
            ("sigma1", self.sigma1),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("rho", self.rho),
            ("alpha1", self.alpha1),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("y1", self.y1),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        if self.sigma1 < 0.0 {
            return Err(Error::param("sigma1", "must be non-negative"));
        }
        if self.sigma < 0.0 {
            return Err(Error::param("sigma", "must be non-negative"));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::param(
                "rho",
                format!("must lie in [-1, 1], got {}", self.rho),
            ));
        }
        for (&age, &y2) in &self.y2_by_age {
            if age as f64 > omega {
                return Err(Error::param(
                    "y2_by_age",
                    format!("age {age} exceeds omega {omega}"),
                ));
            }
            if !y2.is_finite() {
                return Err(Error::param(
                    "y2_by_age",
                    format!("value for age {age} is not finite"),
                ));
            }
        }
        Ok(())
    }

    pub fn y2(&self, x: u32) -> Result<f64> {
        self.y2_by_age.get(&x).copied().ok_or(Error::MissingY2(x))
    }

    /// Factor-2 volatility for initial age `x`.
    pub fn sigma2(&self, x: u32) -> f64 {
        self.sigma * (self.gamma * x as f64).exp()
    }

    /// Same parameters with the two volatilities switched off.
    pub fn deterministic(&self) -> Self {
        ModelParams {
            sigma1: 0.0,
            sigma: 0.0,
            ..self.clone()
        }
    }
}

/// Probability measure used for expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Measure {
    RealWorld,
    /// Risk-adjusted measure indexed by the market price of longevity risk.
    RiskAdjusted(f64),
}

impl Measure {
    pub fn lambda(self) -> f64 {
        match self {
            Measure::RealWorld => 0.0,
            Measure::RiskAdjusted(l) => l,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Measure::RiskAdjusted(l) if !l.is_finite() => Err(Error::param(
                "lambda",
                "risk-adjusted measure needs a finite lambda",
            )),
            _ => Ok(()),
        }
    }
}

/// Flat-rate market inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Continuously compounded interest rate.
    pub r: f64,
    /// Market price of longevity risk.
    pub lambda: f64,
    /// Longevity-bond spread per annum.
    pub delta: f64,
    /// Maximum attainable age.
    pub omega: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams {
            r: 0.04,
            lambda: 8.5,
            delta: 0.002,
            omega: 110.0,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::param(
                "r",
                format!("must be finite and >= 0, got {}", self.r),
            ));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::param(
                "delta",
                format!("must be finite and >= 0, got {}", self.delta),
            ));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::param(
                "omega",
                format!("must be positive, got {}", self.omega),
            ));
        }
        if !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite"));
        }
        Ok(())
    }

    pub fn risk_adjusted(&self) -> Measure {
        Measure::RiskAdjusted(self.lambda)
    }

    /// Zero-coupon bond price `B(0, t) = e^{-r t}`.
    pub fn discount(&self, t: f64) -> f64 {
        (-self.r * t).exp()
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        MarketParams { lambda, ..self }
    }
}

/// Factor values of a cohort (initial age `x`) at valuation time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortState {
    pub x: u32,
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
}

impl CohortState {
    pub fn initial(params: &ModelParams, x: u32) -> Result<Self> {
        Ok(CohortState {
            x,
            t: 0.0,
            y1: params.y1,
            y2: params.y2(x)?,
        })
    }

    pub fn at(x: u32, t: f64, y1: f64, y2: f64, omega: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::param(
                "t",
                format!("valuation time must be >= 0, got {t}"),
            ));
        }
        if x as f64 + t > omega {
            return Err(Error::param(
                "t",
                format!("age {x} + t {t} exceeds omega {omega}"),
            ));
        }
        Ok(CohortState { x, t, y1, y2 })
    }

    /// Current intensity `Y1 + Y2`.
    pub fn intensity(&self) -> f64 {
        self.y1 + self.y2
    }
}

/// Mean and variance of `∫_t^T mu(v) dv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianIntegralMoments {
    pub theta: f64,
    pub gamma_var: f64,
}

/// Factor-2 drift rate, shifted by `-lambda * sigma2` under the risk-adjusted measure.
pub fn effective_drift2(params: &ModelParams, x: u32, measure: Measure) -> f64 {
    let real_world = params.alpha * x as f64 + params.beta;
    match measure {
        Measure::RealWorld => real_world,
        Measure::RiskAdjusted(lambda) => real_world - lambda * params.sigma2(x),
    }
}

pub fn integral_moments(
    state: &CohortState,
    maturity: f64,
    params: &ModelParams,
    measure: Measure,
) -> Result<GaussianIntegralMoments> {
    measure.validate()?;
    if !(maturity >= state.t) {
        return Err(Error::MaturityInPast {
            t: state.t,
            maturity,
        });
    }
    let tau = maturity - state.t;
    if tau == 0.0 {
        return Ok(GaussianIntegralMoments {
            theta: 0.0,
            gamma_var: 0.0,
        });
    }
    let a1 = params.alpha1;
    let a2 = effective_drift2(params, state.x, measure);
    let s1 = params.sigma1;
    let s2 = params.sigma2(state.x);

    let theta = growth_integral(a1, tau) * state.y1 + growth_integral(a2, tau) * state.y2;
    let gamma_var = s1 * s1 * ou_cross_integral(a1, a1, tau)
        + s2 * s2 * ou_cross_integral(a2, a2, tau)
        + 2.0 * params.rho * s1 * s2 * ou_cross_integral(a1, a2, tau);

    if !(theta.is_finite() && gamma_var.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite integral moments (theta={theta}, gamma={gamma_var}) over {tau} years"
        )));
    }
    // Roundoff can leave a perfectly cancelled variance slightly negative.
    Ok(GaussianIntegralMoments {
        theta,
        gamma_var: gamma_var.max(0.0),
    })
}

/// `E_t[exp(-∫_t^T mu)] = exp(Γ/2 - Θ)`.
///
/// Values above one are possible when the variance term dominates the mean;
/// they are returned unchanged and logged.
pub fn survival_probability(
    state: &CohortState,
    maturity: f64,
    params: &ModelParams,
    measure: Measure,
) -> Result<f64> {
    let m = integral_moments(state, maturity, params, measure)?;
    let s = (0.5 * m.gamma_var - m.theta).exp();
    if s > 1.0 {
        log::warn!(
            "survival probability {s} > 1 for age {} over [{}, {maturity}] ({measure:?})",
            state.x,
            state.t
        );
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_params() -> ModelParams {
        ModelParams::australian_males_2008()
    }

    #[test]
    fn drift_at_65() {
        let p = base_params();
        assert_relative_eq!(
            effective_drift2(&p, 65, Measure::RealWorld),
            0.0000615 * 65.0 + 0.120931,
            max_relative = 1e-15
        );
        assert_eq!(
            effective_drift2(&p, 65, Measure::RiskAdjusted(0.0)),
            effective_drift2(&p, 65, Measure::RealWorld)
        );
        let shifted = effective_drift2(&p, 65, Measure::RiskAdjusted(8.5));
        let by_hand = 0.1249285 - 8.5 * 0.0000002 * (0.129832f64 * 65.0).exp();
        assert_relative_eq!(shifted, by_hand, max_relative = 1e-13);
        assert!(shifted < 0.1249285);
    }

    #[test]
    fn empty_interval() {
        let p = base_params();
        let s = CohortState::initial(&p, 65).unwrap();
        let m = integral_moments(&s, 0.0, &p, Measure::RealWorld).unwrap();
        assert_eq!((m.theta, m.gamma_var), (0.0, 0.0));
        assert_eq!(
            survival_probability(&s, 0.0, &p, Measure::RiskAdjusted(8.5)).unwrap(),
            1.0
        );
    }

    #[test]
    fn rejects_past_maturity() {
        let p = base_params();
        let s = CohortState::at(65, 5.0, p.y1, 0.01, 110.0).unwrap();
        assert!(matches!(
            integral_moments(&s, 4.0, &p, Measure::RealWorld),
            Err(Error::MaturityInPast { .. })
        ));
    }

    #[test]
    fn deterministic_survival() {
        let p = base_params().deterministic();
        let s = CohortState::initial(&p, 65).unwrap();
        let m = integral_moments(&s, 10.0, &p, Measure::RealWorld).unwrap();
        assert_eq!(m.gamma_var, 0.0);
        assert!(m.theta > 0.0);
        assert_relative_eq!(
            survival_probability(&s, 10.0, &p, Measure::RealWorld).unwrap(),
            (-m.theta).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn zero_drift_limit_is_continuous() {
        let mut p = base_params();
        let s = CohortState::initial(&p, 65).unwrap();
        p.alpha1 = 0.0;
        let at_zero = integral_moments(&s, 20.0, &p, Measure::RealWorld).unwrap();
        p.alpha1 = 1e-7;
        let near_zero = integral_moments(&s, 20.0, &p, Measure::RealWorld).unwrap();
        assert_relative_eq!(at_zero.theta, near_zero.theta, max_relative = 1e-5);
        assert_relative_eq!(at_zero.gamma_var, near_zero.gamma_var, max_relative = 1e-5);
    }

    #[test]
    fn missing_y2_is_an_error() {
        assert!(matches!(
            CohortState::initial(&base_params(), 70),
            Err(Error::MissingY2(70))
        ));
    }

    #[test]
    fn survival_above_one_is_returned_unclamped() {
        let mut p = base_params();
        p.sigma1 = 0.5;
        p.y1 = 0.0;
        p.y2_by_age.insert(65, 0.0);
        let s = CohortState::initial(&p, 65).unwrap();
        assert!(survival_probability(&s, 10.0, &p, Measure::RealWorld).unwrap() > 1.0);
    }

    #[test]
    fn parameter_validation() {
        let mut p = base_params();
        p.rho = 1.5;
        assert!(p.validate(110.0).is_err());
        let mut p = base_params();
        p.y2_by_age.insert(120, 0.1);
        assert!(p.validate(110.0).is_err());
        assert!(base_params().validate(110.0).is_ok());
    }
}
