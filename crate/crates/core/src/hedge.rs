//! Discounted surplus of an annuity portfolio, unhedged and hedged with a
//! longevity swap or cap, and the risk statistics of its distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::neumaier_sum;
use crate::model::{CohortState, MarketParams, Measure, ModelParams};
use crate::par::{self, Execution};
use crate::price::{annuity_price, cap_price, CapSpec, SwapSpec, ValuationContext};
use crate::sim::{simulate_path, DeathTimeSampler, PathSample, RngSpec, SimConfig};

/// Fewer tail samples than this trigger a warning on VaR/ES.
pub const MIN_TAIL_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeConfig {
    pub x: u32,
    /// Number of annuitants.
    pub n: u32,
    pub lambda: f64,
    /// Last payment date of the hedge.
    pub t_hat: u32,
    pub num_sims: usize,
    /// Tail level for VaR and ES.
    pub q: f64,
    pub seed: u64,
    pub dt: f64,
}

impl HedgeConfig {
    pub fn base_case() -> Self {
        HedgeConfig {
            x: 65,
            n: 4000,
            lambda: 8.5,
            t_hat: 30,
            num_sims: 5000,
            q: 0.01,
            seed: 2008,
            dt: 1.0 / 50.0,
        }
    }

    pub fn validate(&self, market: &MarketParams) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "portfolio needs at least one policy"));
        }
        if self.num_sims == 0 {
            return Err(Error::param("num_sims", "need at least one simulation"));
        }
        if !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite"));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::param(
                "q",
                format!("must lie in (0, 1), got {}", self.q),
            ));
        }
        let remaining = market.omega - self.x as f64;
        if !(remaining >= 1.0) {
            return Err(Error::param(
                "x",
                format!(
                    "age {} leaves no payment before omega {}",
                    self.x, market.omega
                ),
            ));
        }
        if self.t_hat == 0 || self.t_hat as f64 > remaining {
            return Err(Error::param(
                "T_hat",
                format!("must lie in [1, {remaining}], got {}", self.t_hat),
            ));
        }
        SimConfig::with_dt(self.dt).steps_for(remaining)?;
        Ok(())
    }

    fn horizon(&self, market: &MarketParams) -> f64 {
        market.omega - self.x as f64
    }
}

/// `A = n a_x`, priced with the configuration's `lambda`.
pub fn portfolio_premium(
    config: &HedgeConfig,
    params: &ModelParams,
    market: &MarketParams,
) -> Result<f64> {
    let market = market.with_lambda(config.lambda);
    Ok(config.n as f64 * annuity_price(config.x, params, &market)?)
}

/// Present value of 1 per year paid at each integer date survived.
#[derive(Debug, Clone)]
pub struct LiabilityTable {
    cumulative: Vec<f64>,
}

impl LiabilityTable {
    pub fn new(market: &MarketParams, max_years: u32) -> Self {
        let mut cumulative = Vec::with_capacity(max_years as usize + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for t in 1..=max_years {
            acc += market.discount(t as f64);
            cumulative.push(acc);
        }
        LiabilityTable { cumulative }
    }

    /// `sum_{T=1}^{floor(tau)} B(0, T)`.
    pub fn policy(&self, tau: f64) -> f64 {
        let k = (tau.max(0.0).floor() as usize).min(self.cumulative.len() - 1);
        self.cumulative[k]
    }
}

/// `L = sum_k sum_{T=1}^{floor(tau_k)} B(0, T)`.
pub fn portfolio_liability(death_times: &[f64], market: &MarketParams) -> f64 {
    let max = death_times.iter().fold(0.0f64, |m, &t| m.max(t));
    let table = LiabilityTable::new(market, max.floor() as u32);
    neumaier_sum(death_times.iter().map(|&t| table.policy(t)))
}

/// Strikes, discount factors and premiums of one hedging experiment.
#[derive(Debug, Clone)]
pub struct HedgeInstruments {
    pub n: f64,
    pub discounts: Vec<f64>,
    /// Swap rates `S̃_x(0, T)` under the configuration's `lambda`.
    pub swap: SwapSpec,
    /// Best-estimate strikes `S_x(0, T)`.
    pub cap: CapSpec,
    /// `A`.
    pub premium: f64,
    /// `C_cap`.
    pub cap_premium: f64,
    /// `n sum_T B(0,T) S̃_x(0,T)`, the fixed leg of the swap.
    pub swap_fixed_leg: f64,
}

impl HedgeInstruments {
    pub fn new(config: &HedgeConfig, params: &ModelParams, market: &MarketParams) -> Result<Self> {
        config.validate(market)?;
        let priced = market.with_lambda(config.lambda);
        let n = config.n as f64;
        let swap = SwapSpec::at_swap_rates(config.x, config.t_hat, n, params, &priced)?;
        let cap = CapSpec::at_best_estimate(config.x, config.t_hat, n, params)?;
        let ctx = ValuationContext::inception(params, &priced, config.x)?;
        let cap_premium = cap_price(&cap, &ctx)?;
        let discounts: Vec<f64> = (1..=config.t_hat)
            .map(|t| market.discount(t as f64))
            .collect();
        let swap_fixed_leg =
            n * neumaier_sum(discounts.iter().zip(&swap.strikes).map(|(b, k)| b * k));
        Ok(HedgeInstruments {
            n,
            discounts,
            swap,
            cap,
            premium: portfolio_premium(config, params, market)?,
            cap_premium,
            swap_fixed_leg,
        })
    }

    fn index_leg(&self, path: &PathSample) -> Result<f64> {
        let mut acc = 0.0;
        for (k, b) in self.discounts.iter().enumerate() {
            acc += b * path.survivor_index_at((k + 1) as f64)?;
        }
        Ok(self.n * acc)
    }

    /// `F_swap = n sum_T B(0,T) (index(T) - S̃_x(0,T))`.
    pub fn swap_cashflow(&self, path: &PathSample) -> Result<f64> {
        Ok(self.index_leg(path)? - self.swap_fixed_leg)
    }

    /// `(F_cap, C_cap)` with `F_cap = n sum_T B(0,T) max(index(T) - S_x(0,T), 0)`.
    pub fn cap_cashflow(&self, path: &PathSample) -> Result<(f64, f64)> {
        let mut acc = 0.0;
        for (k, (b, strike)) in self.discounts.iter().zip(&self.cap.strikes).enumerate() {
            acc += b * (path.survivor_index_at((k + 1) as f64)? - strike).max(0.0);
        }
        Ok((self.n * acc, self.cap_premium))
    }
}

pub fn swap_cashflow(
    path: &PathSample,
    config: &HedgeConfig,
    params: &ModelParams,
    market: &MarketParams,
) -> Result<f64> {
    HedgeInstruments::new(config, params, market)?.swap_cashflow(path)
}

pub fn cap_cashflow(
    path: &PathSample,
    config: &HedgeConfig,
    params: &ModelParams,
    market: &MarketParams,
) -> Result<(f64, f64)> {
    HedgeInstruments::new(config, params, market)?.cap_cashflow(path)
}

/// Portfolio-level quantities of one outer simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurplusSample {
    pub a: f64,
    pub l: f64,
    pub f_swap: f64,
    pub f_cap: f64,
    pub c_cap: f64,
    pub d_no: f64,
    pub d_swap: f64,
    pub d_cap: f64,
}

impl SurplusSample {
    pub fn new(a: f64, l: f64, f_swap: f64, f_cap: f64, c_cap: f64) -> Self {
        SurplusSample {
            a,
            l,
            f_swap,
            f_cap,
            c_cap,
            d_no: a - l,
            d_swap: a - l + f_swap,
            d_cap: a - l + f_cap - c_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Portfolio {
    #[serde(rename = "unhedged")]
    Unhedged,
    #[serde(rename = "swap")]
    SwapHedged,
    #[serde(rename = "cap")]
    CapHedged,
}

impl Portfolio {
    pub const ALL: [Portfolio; 3] = [
        Portfolio::Unhedged,
        Portfolio::SwapHedged,
        Portfolio::CapHedged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Portfolio::Unhedged => "unhedged",
            Portfolio::SwapHedged => "swap",
            Portfolio::CapHedged => "cap",
        }
    }
}

/// The path-dependent pieces of one outer simulation. None of them depend
/// on `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimDraw {
    pub liability: f64,
    /// `n sum_T B(0,T) index(T)`.
    pub index_leg: f64,
    pub f_cap: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: HedgeConfig,
    pub instruments: HedgeInstruments,
    pub draws: Vec<SimDraw>,
}

impl ExperimentResult {
    pub fn sample(&self, i: usize) -> SurplusSample {
        let d = &self.draws[i];
        SurplusSample::new(
            self.instruments.premium,
            d.liability,
            d.index_leg - self.instruments.swap_fixed_leg,
            d.f_cap,
            self.instruments.cap_premium,
        )
    }

    pub fn samples(&self) -> impl Iterator<Item = SurplusSample> + '_ {
        (0..self.draws.len()).map(|i| self.sample(i))
    }

    /// Per-policy surplus of each outer simulation.
    pub fn surpluses(&self, portfolio: Portfolio) -> Vec<f64> {
        let n = self.instruments.n;
        self.samples()
            .map(|s| match portfolio {
                Portfolio::Unhedged => s.d_no,
                Portfolio::SwapHedged => s.d_swap,
                Portfolio::CapHedged => s.d_cap,
            } / n)
            .collect()
    }

    /// Per-policy surplus split into its `lambda`-free random part and the
    /// per-sample constant that carries `lambda`.
    pub fn decomposed(&self, portfolio: Portfolio) -> (Vec<f64>, f64) {
        let ins = &self.instruments;
        let n = ins.n;
        let random = self
            .draws
            .iter()
            .map(|d| match portfolio {
                Portfolio::Unhedged => -d.liability,
                Portfolio::SwapHedged => d.index_leg - d.liability,
                Portfolio::CapHedged => d.f_cap - d.liability,
            } / n)
            .collect();
        let constant = match portfolio {
            Portfolio::Unhedged => ins.premium,
            Portfolio::SwapHedged => ins.premium - ins.swap_fixed_leg,
            Portfolio::CapHedged => ins.premium - ins.cap_premium,
        } / n;
        (random, constant)
    }

    /// Statistics of the per-policy surplus. Dispersion is measured on the
    /// random part, so it is identical for any `lambda` given the seed.
    pub fn report(&self, portfolio: Portfolio) -> Result<RiskReport> {
        let (random, constant) = self.decomposed(portfolio);
        Ok(summary_stats(&random, self.config.q)?.shifted(constant))
    }

    pub fn risk_reduction(&self, hedged: Portfolio) -> Result<f64> {
        risk_reduction(
            &self.decomposed(hedged).0,
            &self.decomposed(Portfolio::Unhedged).0,
        )
    }
}

/// Simulate `num_sims` cohort intensity paths under the real-world measure
/// and `n` death times on each. Simulation `i` draws from stream `i` of the
/// seed, path first, so the three portfolios share every random number.
pub fn run_experiment(
    config: &HedgeConfig,
    params: &ModelParams,
    market: &MarketParams,
    exec: Execution,
) -> Result<ExperimentResult> {
    let instruments = HedgeInstruments::new(config, params, market)?;
    let horizon = config.horizon(market);
    let sim = SimConfig::with_dt(config.dt);
    let state = CohortState::initial(params, config.x)?;
    let liabilities = LiabilityTable::new(market, horizon.floor() as u32);
    let draws = par::try_map_indexed(config.num_sims, exec, |i| -> Result<SimDraw> {
        let mut rng = RngSpec::new(config.seed, i as u64).rng();
        let path = simulate_path(
            params,
            &state,
            market,
            Measure::RealWorld,
            horizon,
            &sim,
            &mut rng,
        )?;
        let sampler = DeathTimeSampler::new(&path);
        let liability =
            neumaier_sum((0..config.n).map(|_| liabilities.policy(sampler.sample(&mut rng))));
        Ok(SimDraw {
            liability,
            index_leg: instruments.index_leg(&path)?,
            f_cap: instruments.cap_cashflow(&path)?.0,
        })
    })?;
    Ok(ExperimentResult {
        config: config.clone(),
        instruments,
        draws,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub var_q: f64,
    pub es_q: f64,
    pub q: f64,
    pub num_samples: usize,
    /// Samples at or below `var_q`.
    pub tail_count: usize,
    pub warning: Option<String>,
}

impl RiskReport {
    /// Statistics of `samples + c`.
    pub fn shifted(mut self, c: f64) -> Self {
        self.mean += c;
        self.var_q += c;
        self.es_q += c;
        self
    }
}

/// Mean, unbiased standard deviation, skewness `m3 / m2^{3/2}`, the lower
/// `q`-quantile (order statistic `ceil(qN)`) and the mean of the samples at
/// or below it.
///
/// A zero-variance sample has skewness 0. A single sample has undefined
/// dispersion (NaN) and is reported with a warning.
pub fn summary_stats(samples: &[f64], q: f64) -> Result<RiskReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("must lie in (0, 1), got {q}")));
    }
    let n = samples.len();
    let nf = n as f64;
    let mean = neumaier_sum(samples.iter().copied()) / nf;
    let m2 = neumaier_sum(samples.iter().map(|v| (v - mean).powi(2))) / nf;
    let m3 = neumaier_sum(samples.iter().map(|v| (v - mean).powi(3))) / nf;
    let (std_dev, skewness) = if n < 2 {
        (f64::NAN, f64::NAN)
    } else {
        let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        ((m2 * nf / (nf - 1.0)).sqrt(), skew)
    };

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * nf).ceil() as usize).clamp(1, n);
    let var_q = sorted[rank - 1];
    let tail: Vec<f64> = sorted.iter().copied().take_while(|&v| v <= var_q).collect();
    let es_q = neumaier_sum(tail.iter().copied()) / tail.len() as f64;

    let mut notes = Vec::new();
    if n < 2 {
        notes.push("a single sample has no dispersion".to_string());
    }
    if tail.len() < MIN_TAIL_SAMPLES {
        notes.push(format!(
            "tail estimates unreliable: only {} sample(s) at or below the {q} quantile",
            tail.len()
        ));
    }
    let warning = (!notes.is_empty()).then(|| notes.join("; "));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(RiskReport {
        mean,
        std_dev,
        skewness,
        var_q,
        es_q,
        q,
        num_samples: n,
        tail_count: tail.len(),
        warning,
    })
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = neumaier_sum(xs.iter().copied()) / n;
    neumaier_sum(xs.iter().map(|v| (v - mean).powi(2))) / n
}

/// `1 - Var(hedged) / Var(unhedged)`.
pub fn risk_reduction(hedged: &[f64], unhedged: &[f64]) -> Result<f64> {
    if hedged.is_empty() || unhedged.is_empty() {
        return Err(Error::InsufficientData(
            "risk reduction needs samples".into(),
        ));
    }
    let vu = variance(unhedged);
    if !(vu > 0.0) {
        return Err(Error::Numerical(
            "unhedged surplus has zero variance".into(),
        ));
    }
    Ok(1.0 - variance(hedged) / vu)
}
