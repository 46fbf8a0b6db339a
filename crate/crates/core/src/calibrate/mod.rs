//! Two-stage least-squares estimation from central death rates and
//! calibration of the market price of longevity risk.

mod synth;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use synth::synthetic_table;
pub use table::MortalityTable;

use crate::error::{Error, Result};
use crate::model::{
    integral_moments, survival_probability, CohortState, MarketParams, Measure, ModelParams,
};
use crate::optim::{multistart, Bounds, NelderMead};
use crate::par::Execution;

/// Smallest positive `sigma` the volatility search represents; it works in
/// `ln sigma` and snaps to zero afterwards.
const SIGMA_FLOOR: f64 = 1e-12;
const SIGMA_MAX: f64 = 0.1;

/// Cohort differences `m(x+1, t+1) - m(x, t)`, one row per age.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaM {
    pub min_age: u32,
    pub min_year: i32,
    pub rows: Vec<Vec<f64>>,
}

impl DeltaM {
    pub fn row(&self, age: u32) -> Option<&[f64]> {
        age.checked_sub(self.min_age)
            .and_then(|i| self.rows.get(i as usize))
            .map(Vec::as_slice)
    }

    pub fn get(&self, age: u32, year: i32) -> Option<f64> {
        let j = usize::try_from(year - self.min_year).ok()?;
        self.row(age)?.get(j).copied()
    }
}

pub fn delta_m(table: &MortalityTable) -> Result<DeltaM> {
    let ages: Vec<u32> = table.ages().collect();
    if ages.len() < 2 || table.n_years() < 2 {
        return Err(Error::InsufficientData(
            "differencing needs at least 2 ages and 2 years".into(),
        ));
    }
    let rows = ages[..ages.len() - 1]
        .iter()
        .map(|&age| {
            let now = table.row(age).expect("age in range");
            let next = table.row(age + 1).expect("age in range");
            now.iter().zip(&next[1..]).map(|(a, b)| b - a).collect()
        })
        .collect();
    Ok(DeltaM {
        min_age: *table.ages().start(),
        min_year: *table.years().start(),
        rows,
    })
}

/// Unbiased variance of the `delta_m` row for age `x`.
pub fn sample_variance_delta_m(table: &MortalityTable, x: u32) -> Result<f64> {
    if !table.ages().contains(&x) || !table.ages().contains(&(x + 1)) {
        return Err(Error::InsufficientData(format!(
            "ages {x} and {} must both be in the table",
            x + 1
        )));
    }
    if table.n_years() < 3 {
        return Err(Error::InsufficientData(
            "need at least 3 calendar years for a sample variance".into(),
        ));
    }
    let now = table.row(x).expect("checked");
    let next = table.row(x + 1).expect("checked");
    let diffs: Vec<f64> = now.iter().zip(&next[1..]).map(|(a, b)| b - a).collect();
    Ok(sample_variance(&diffs))
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Variance of a one-step change in intensity for age `x` over `dt`.
pub fn model_variance_delta_mu(params: &ModelParams, x: u32, dt: f64) -> f64 {
    vol_profile(params.sigma1, params.sigma, params.gamma, params.rho, x, dt)
}

fn vol_profile(sigma1: f64, sigma: f64, gamma: f64, rho: f64, x: u32, dt: f64) -> f64 {
    let s2 = sigma * (gamma * x as f64).exp();
    (sigma1 * sigma1 + 2.0 * sigma1 * s2 * rho + s2 * s2) * dt
}

/// Search settings shared by both fitting stages.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMead,
    pub exec: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: 20,
            seed: 2008,
            nelder_mead: NelderMead::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityFit {
    pub sigma1: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub rho: f64,
    /// Sum of squared variance errors, in variance units squared.
    pub sse: f64,
    pub converged: bool,
}

impl VolatilityFit {
    pub fn variance(&self, x: u32, dt: f64) -> f64 {
        vol_profile(self.sigma1, self.sigma, self.gamma, self.rho, x, dt)
    }
}

/// Fit `{sigma1, sigma, gamma, rho}` to the sample variances of `delta_m`
/// at the given ages.
pub fn fit_volatility(
    table: &MortalityTable,
    ages: &[u32],
    options: &FitOptions,
) -> Result<VolatilityFit> {
    let targets = ages
        .iter()
        .map(|&x| Ok((x, sample_variance_delta_m(table, x)?)))
        .collect::<Result<Vec<_>>>()?;
    fit_volatility_to_targets(&targets, options)
}

/// Fit the volatility parameters to `(age, variance)` targets with `dt = 1`.
pub fn fit_volatility_to_targets(
    targets: &[(u32, f64)],
    options: &FitOptions,
) -> Result<VolatilityFit> {
    if targets.is_empty() {
        return Err(Error::InsufficientData("no target variances".into()));
    }
    if let Some(&(x, v)) = targets.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param(
            "targets",
            format!("variance {v} at age {x} must be finite and >= 0"),
        ));
    }
    let sse = |s1: f64, s: f64, g: f64, r: f64| {
        targets
            .iter()
            .map(|&(x, v)| (vol_profile(s1, s, g, r, x, 1.0) - v).powi(2))
            .sum::<f64>()
    };
    let scale = targets.iter().map(|(_, v)| v * v).sum::<f64>();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let objective = |z: &[f64]| sse(z[0], z[1].exp(), z[2], z[3]) / scale;

    let bounds = Bounds::new(
        vec![0.0, SIGMA_FLOOR.ln(), 0.0, -1.0],
        vec![SIGMA_MAX, SIGMA_MAX.ln(), 0.5, 1.0],
    )?;
    let start_box = Bounds::new(
        vec![0.0, (1e-9f64).ln(), 0.0, -1.0],
        vec![0.01, (1e-3f64).ln(), 0.3, 1.0],
    )?;
    let run = multistart(
        &objective,
        &bounds,
        &start_box,
        None,
        options.starts,
        options.seed,
        &options.nelder_mead,
        options.exec,
    )?;
    let z = &run.best.x;
    let mut fit = VolatilityFit {
        sigma1: z[0],
        sigma: z[1].exp(),
        gamma: z[2],
        rho: z[3],
        sse: sse(z[0], z[1].exp(), z[2], z[3]),
        converged: run.best.converged,
    };
    // The log coordinate cannot reach sigma = 0; try the boundary explicitly.
    for (s1, s) in [(fit.sigma1, 0.0), (0.0, fit.sigma), (0.0, 0.0)] {
        let candidate = sse(s1, s, fit.gamma, fit.rho);
        if candidate <= fit.sse {
            fit.sigma1 = s1;
            fit.sigma = s;
            fit.sse = candidate;
        }
    }
    if !fit.converged {
        log::warn!("volatility fit stopped at budget with SSE {:e}", fit.sse);
    }
    Ok(fit)
}

/// Empirical cohort survival `prod_{v=1}^{T} (1 - m(x+v-1, t0))` at the
/// table's last calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub x: u32,
    /// `values[j-1]` is the survival probability to year `j`.
    pub values: Vec<f64>,
}

impl SurvivalCurve {
    pub fn new(x: u32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData(
                "survival curve needs at least one year".into(),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param(
                "values",
                "survival probabilities must lie in [0, 1]",
            ));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param(
                "values",
                "survival curve must be non-increasing",
            ));
        }
        Ok(SurvivalCurve { x, values })
    }

    pub fn horizon(&self) -> u32 {
        self.values.len() as u32
    }
}

pub fn empirical_survival_curve(
    table: &MortalityTable,
    x: u32,
    horizon: u32,
) -> Result<SurvivalCurve> {
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    let base = *table.years().end();
    let mut s = 1.0;
    let mut values = Vec::with_capacity(horizon as usize);
    for v in 1..=horizon {
        let age = x + v - 1;
        let m = table.get(age, base)?;
        if m > 1.0 {
            return Err(Error::param(
                "mx",
                format!("rate {m} at age {age} exceeds 1"),
            ));
        }
        s *= 1.0 - m;
        values.push(s);
    }
    SurvivalCurve::new(x, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub alpha1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub y1: f64,
    pub y2_by_age: BTreeMap<u32, f64>,
    pub sse: f64,
    pub converged: bool,
    /// Set when the data carry no mortality (flat curves) or the fit drives
    /// the initial intensity to zero.
    pub degenerate: bool,
}

impl ModelParams {
    pub fn from_fits(vol: &VolatilityFit, drift: &DriftFit) -> Self {
        ModelParams {
            sigma1: vol.sigma1,
            sigma: vol.sigma,
            gamma: vol.gamma,
            rho: vol.rho,
            alpha1: drift.alpha1,
            alpha: drift.alpha,
            beta: drift.beta,
            y1: drift.y1,
            y2_by_age: drift.y2_by_age.clone(),
        }
    }
}

fn curve_sse(params: &ModelParams, curves: &[SurvivalCurve]) -> f64 {
    let mut total = 0.0;
    for curve in curves {
        let Some(&y2) = params.y2_by_age.get(&curve.x) else {
            return f64::INFINITY;
        };
        let state = CohortState {
            x: curve.x,
            t: 0.0,
            y1: params.y1,
            y2,
        };
        for (j, target) in curve.values.iter().enumerate() {
            // survival_probability would log every S > 1 the search visits
            let Ok(m) = integral_moments(&state, (j + 1) as f64, params, Measure::RealWorld) else {
                return f64::INFINITY;
            };
            let model = (0.5 * m.gamma_var - m.theta).exp();
            total += (target - model).powi(2);
        }
    }
    total
}

/// Fit `{alpha1, alpha, beta, y1, y2^x}` to empirical survival curves with
/// the volatility parameters held fixed.
pub fn fit_drift(
    curves: &[SurvivalCurve],
    vol: &VolatilityFit,
    options: &FitOptions,
) -> Result<DriftFit> {
    if curves.is_empty() {
        return Err(Error::InsufficientData("no survival curves".into()));
    }
    let mut ages: Vec<u32> = curves.iter().map(|c| c.x).collect();
    ages.sort_unstable();
    ages.dedup();
    if ages.len() != curves.len() {
        return Err(Error::param("curves", "one curve per cohort age"));
    }
    let build = |z: &[f64]| ModelParams {
        sigma1: vol.sigma1,
        sigma: vol.sigma,
        gamma: vol.gamma,
        rho: vol.rho,
        alpha1: z[0],
        alpha: z[1],
        beta: z[2],
        y1: z[3],
        y2_by_age: curves.iter().zip(&z[4..]).map(|(c, &y)| (c.x, y)).collect(),
    };
    let objective = |z: &[f64]| curve_sse(&build(z), curves);

    let k = curves.len();
    let mut lower = vec![-0.5, -0.5, 0.0, 0.0];
    let mut upper = vec![0.5, 0.5, 1.0, 0.2];
    let mut start_lower = vec![-0.01, -1e-3, 0.0, 0.0];
    let mut start_upper = vec![0.01, 1e-3, 0.3, 0.01];
    lower.extend(std::iter::repeat_n(0.0, k));
    upper.extend(std::iter::repeat_n(0.2, k));
    start_lower.extend(std::iter::repeat_n(0.0, k));
    start_upper.extend(std::iter::repeat_n(0.05, k));
    let bounds = Bounds::new(lower, upper)?;
    let start_box = Bounds::new(start_lower, start_upper)?;

    let run = multistart(
        &objective,
        &bounds,
        &start_box,
        None,
        options.starts,
        options.seed,
        &options.nelder_mead,
        options.exec,
    )?;
    let best = build(&run.best.x);
    let flat = curves.iter().all(|c| c.values.iter().all(|&v| v == 1.0));
    let zero_intensity = best.y2_by_age.values().any(|y2| best.y1 + y2 < 1e-8);
    let degenerate = flat || zero_intensity;
    if degenerate {
        log::warn!("drift fit is degenerate: the curves imply (near) zero mortality");
    }
    if !run.best.converged {
        log::warn!("drift fit stopped at budget with SSE {:e}", run.best.value);
    }
    Ok(DriftFit {
        alpha1: best.alpha1,
        alpha: best.alpha,
        beta: best.beta,
        y1: best.y1,
        y2_by_age: best.y2_by_age,
        sse: run.best.value,
        converged: run.best.converged,
        degenerate,
    })
}

/// Longevity bond paying the cohort survivor index each year to `term`.
///
/// Real-world prices carry the spread `e^{delta T}`; risk-adjusted prices
/// carry none.
pub fn longevity_bond_price(
    params: &ModelParams,
    market: &MarketParams,
    x: u32,
    term: u32,
    measure: Measure,
) -> Result<f64> {
    if term == 0 {
        return Err(Error::param("term", "must be at least 1"));
    }
    if (x + term) as f64 > market.omega {
        return Err(Error::param(
            "term",
            format!("age {x} + term {term} exceeds omega {}", market.omega),
        ));
    }
    let state = CohortState::initial(params, x)?;
    let spread = match measure {
        Measure::RealWorld => market.delta,
        Measure::RiskAdjusted(_) => 0.0,
    };
    let mut v = 0.0;
    for t in 1..=term {
        let t = t as f64;
        v += market.discount(t)
            * (spread * t).exp()
            * survival_probability(&state, t, params, measure)?;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCalibration {
    pub lambda: f64,
    /// Real-world bond price with spread.
    pub target: f64,
    /// Risk-adjusted bond price at `lambda`.
    pub price: f64,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

impl LambdaCalibration {
    pub fn gap(&self) -> f64 {
        self.price - self.target
    }
}

pub const LAMBDA_TOLERANCE: f64 = 1e-4;

/// Golden-section search for the `lambda` whose risk-adjusted bond price
/// matches the real-world price with spread.
pub fn calibrate_lambda(
    params: &ModelParams,
    market: &MarketParams,
    x: u32,
    term: u32,
    bracket: (f64, f64),
) -> Result<LambdaCalibration> {
    let (mut a, mut b) = bracket;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::param(
            "bracket",
            format!("need finite lo < hi, got [{a}, {b}]"),
        ));
    }
    let target = longevity_bond_price(params, market, x, term, Measure::RealWorld)?;
    let gap = |l: f64| -> Result<f64> {
        Ok(
            (longevity_bond_price(params, market, x, term, Measure::RiskAdjusted(l))? - target)
                .abs(),
        )
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = gap(c)?;
    let mut fd = gap(d)?;
    while b - a > 1e-10 * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = gap(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = gap(d)?;
        }
    }
    let mut best = if fc < fd { c } else { d };
    for end in [bracket.0, bracket.1] {
        if gap(end)? < gap(best)? {
            best = end;
        }
    }
    let price = longevity_bond_price(params, market, x, term, Measure::RiskAdjusted(best))?;
    let converged = (price - target).abs() < LAMBDA_TOLERANCE;
    let diagnostic = (!converged).then(|| {
        format!(
            "no lambda in [{}, {}] matches the bond price {target:.6}; closest {best:.6} leaves a gap of {:e}",
            bracket.0,
            bracket.1,
            price - target
        )
    });
    if let Some(msg) = &diagnostic {
        log::warn!("{msg}");
    }
    Ok(LambdaCalibration {
        lambda: best,
        target,
        price,
        converged,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_params() -> ModelParams {
        ModelParams::australian_males_2008()
    }

    fn from_fn(
        ages: std::ops::RangeInclusive<u32>,
        years: std::ops::RangeInclusive<i32>,
        f: impl Fn(u32, i32) -> f64,
    ) -> MortalityTable {
        let y0 = *years.start();
        let a0 = *ages.start();
        let rows = ages
            .map(|a| years.clone().map(|y| f(a, y)).collect())
            .collect();
        MortalityTable::new(a0, y0, rows).unwrap()
    }

    #[test]
    fn delta_m_constant_and_linear() {
        let c = delta_m(&from_fn(60..=63, 2000..=2004, |_, _| 0.02)).unwrap();
        assert!(c.rows.iter().flatten().all(|&v| v == 0.0));
        let l = delta_m(&from_fn(60..=63, 2000..=2004, |a, _| a as f64)).unwrap();
        assert_eq!(l.rows.len(), 3);
        assert!(l
            .rows
            .iter()
            .all(|r| r.len() == 4 && r.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn delta_m_runs_along_the_diagonal() {
        // age and year steps have different sizes, so the direction is visible
        let t = from_fn(60..=62, 2000..=2002, |a, y| a as f64 * 100.0 + y as f64);
        let d = delta_m(&t).unwrap();
        assert_eq!(d.get(60, 2000), Some(101.0));
        assert_eq!(d.get(61, 2001), Some(101.0));
        assert_eq!(d.get(62, 2000), None);
        assert!(delta_m(&from_fn(60..=60, 2000..=2003, |_, _| 0.1)).is_err());
    }

    #[test]
    fn sample_variance_by_hand() {
        // diagonal differences {0, 2}
        let t =
            MortalityTable::new(60, 2000, vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(sample_variance_delta_m(&t, 60).unwrap(), 2.0);
        let flat = from_fn(60..=61, 2000..=2005, |a, y| (a as f64) + (y as f64));
        assert_eq!(sample_variance_delta_m(&flat, 60).unwrap(), 0.0);
        assert!(sample_variance_delta_m(&flat, 61).is_err());
        let short = from_fn(60..=61, 2000..=2001, |_, _| 0.1);
        assert!(sample_variance_delta_m(&short, 60).is_err());
    }

    #[test]
    fn model_variance_special_cases() {
        let mut p = base_params();
        let v = model_variance_delta_mu(&p, 65, 1.0);
        let s2 = p.sigma * (p.gamma * 65.0).exp();
        assert_relative_eq!(
            v,
            p.sigma1.powi(2) + 2.0 * p.sigma1 * s2 * p.rho + s2 * s2,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            model_variance_delta_mu(&p, 65, 0.5),
            0.5 * v,
            max_relative = 1e-14
        );
        p.rho = -1.0;
        p.sigma1 = s2;
        assert!(model_variance_delta_mu(&p, 65, 1.0).abs() < 1e-20);
        p.sigma1 = 0.0;
        p.sigma = 0.0;
        assert_eq!(model_variance_delta_mu(&p, 65, 1.0), 0.0);
    }

    #[test]
    fn survival_curve_examples() {
        let zero = from_fn(60..=70, 2000..=2001, |_, _| 0.0);
        assert!(empirical_survival_curve(&zero, 60, 5)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 1.0));
        let one = from_fn(60..=70, 2000..=2001, |_, _| 1.0);
        assert!(empirical_survival_curve(&one, 60, 5)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
        let t = from_fn(65..=66, 2007..=2008, |a, y| {
            if y == 2008 {
                (a - 64) as f64 * 0.01
            } else {
                0.5
            }
        });
        let c = empirical_survival_curve(&t, 65, 2).unwrap();
        assert_relative_eq!(c.values[1], 0.99 * 0.98, max_relative = 1e-15);
        assert!(empirical_survival_curve(&t, 65, 3).is_err());
        let bad = from_fn(60..=61, 2000..=2000, |_, _| 1.5);
        assert!(empirical_survival_curve(&bad, 60, 1).is_err());
    }

    #[test]
    fn survival_curve_validation() {
        assert!(SurvivalCurve::new(65, vec![0.9, 0.95]).is_err());
        assert!(SurvivalCurve::new(65, vec![1.1]).is_err());
        assert!(SurvivalCurve::new(65, vec![]).is_err());
    }

    #[test]
    fn zero_targets_give_zero_volatility() {
        let targets: Vec<_> = (60..=90).step_by(5).map(|x| (x, 0.0)).collect();
        let fit = fit_volatility_to_targets(&targets, &FitOptions::default()).unwrap();
        assert_eq!(fit.sse, 0.0);
        assert_eq!((fit.sigma1, fit.sigma), (0.0, 0.0));
    }

    #[test]
    fn bond_measures_coincide_without_spread_or_lambda() {
        let p = base_params();
        let m = MarketParams {
            delta: 0.0,
            ..MarketParams::default()
        };
        let real = longevity_bond_price(&p, &m, 65, 25, Measure::RealWorld).unwrap();
        let q = longevity_bond_price(&p, &m, 65, 25, Measure::RiskAdjusted(0.0)).unwrap();
        assert_eq!(real, q);
        let s = CohortState::initial(&p, 65).unwrap();
        let by_hand: f64 = (1..=25)
            .map(|t| {
                (-0.04 * t as f64).exp()
                    * survival_probability(&s, t as f64, &p, Measure::RealWorld).unwrap()
            })
            .sum();
        assert_eq!(real, by_hand);
        assert!(longevity_bond_price(&p, &m, 65, 0, Measure::RealWorld).is_err());
        assert!(longevity_bond_price(&p, &m, 100, 25, Measure::RealWorld).is_err());
    }

    #[test]
    fn lambda_is_zero_without_spread() {
        let p = base_params();
        let m = MarketParams {
            delta: 0.0,
            ..MarketParams::default()
        };
        let c = calibrate_lambda(&p, &m, 65, 25, (0.0, 30.0)).unwrap();
        assert!(c.converged);
        assert!(c.lambda.abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn unreachable_bond_price_reports_diagnostic() {
        let p = base_params();
        let m = MarketParams {
            delta: 0.05,
            ..MarketParams::default()
        };
        let c = calibrate_lambda(&p, &m, 65, 25, (0.0, 1.0)).unwrap();
        assert!(!c.converged);
        assert!(c.diagnostic.is_some());
        assert_eq!(c.lambda, 1.0);
        assert!(calibrate_lambda(&p, &m, 65, 25, (2.0, 1.0)).is_err());
    }
}
