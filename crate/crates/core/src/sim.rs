//! Exact-transition simulation of the two factors, survivor indices,
//! Cox-process death times and Monte Carlo pricing oracles.
//!
//! Each path owns an independent ChaCha8 stream keyed by `(seed, path index)`,
//! so results are bit-identical regardless of thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{neumaier_sum, ou_step_covariance, ou_step_variance};
use crate::model::{effective_drift2, CohortState, MarketParams, Measure, ModelParams};
use crate::par::{self, Execution};
use crate::price::CapletSpec;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step size in years.
    pub dt: f64,
    /// Floor the simulated intensity at zero. Off by default so that path
    /// statistics agree with the Gaussian closed forms.
    pub clamp_mu_at_zero: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / 50.0,
            clamp_mu_at_zero: false,
        }
    }
}

impl SimConfig {
    pub fn with_dt(dt: f64) -> Self {
        SimConfig {
            dt,
            ..Default::default()
        }
    }

    /// Number of steps covering `horizon`, which must be a multiple of `dt`.
    pub fn steps_for(&self, horizon: f64) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param(
                "dt",
                format!("must be positive, got {}", self.dt),
            ));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::param(
                "horizon",
                format!("must be >= 0, got {horizon}"),
            ));
        }
        let steps = (horizon / self.dt).round();
        if (steps * self.dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::param(
                "dt",
                format!("horizon {horizon} is not a multiple of dt {}", self.dt),
            ));
        }
        Ok(steps as usize)
    }
}

/// One simulated intensity trajectory on the grid `0, dt, ..., horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub dt: f64,
    pub times: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub mu: Vec<f64>,
    /// Trapezoidal cumulative integral of `mu`.
    pub integrated_mu: Vec<f64>,
    pub survivor_index: Vec<f64>,
}

impl PathSample {
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("path has at least one grid point")
    }

    /// Grid index of time `t`; no interpolation.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if !(k >= 0.0)
            || (k * self.dt - t).abs() > 1e-9 * t.max(1.0)
            || k as usize >= self.times.len()
        {
            return Err(Error::OffGrid(t));
        }
        Ok(k as usize)
    }

    /// Survivor index `exp(-∫_0^t mu)` at grid time `t`.
    pub fn survivor_index_at(&self, t: f64) -> Result<f64> {
        Ok(self.survivor_index[self.grid_index(t)?])
    }
}

/// Free-function form of [`PathSample::survivor_index_at`].
pub fn survivor_index(path: &PathSample, t: f64) -> Result<f64> {
    path.survivor_index_at(t)
}

/// Exact one-step transition of `(Y1, Y2)`:
/// mean `e^{a dt} Y`, covariance from the OU integrals, applied via Cholesky.
#[derive(Debug, Clone, Copy)]
struct FactorStepper {
    decay1: f64,
    decay2: f64,
    l11: f64,
    l21: f64,
    l22: f64,
}

impl FactorStepper {
    fn new(params: &ModelParams, x: u32, measure: Measure, dt: f64) -> Self {
        let a1 = params.alpha1;
        let a2 = effective_drift2(params, x, measure);
        let s1 = params.sigma1;
        let s2 = params.sigma2(x);
        let v1 = ou_step_variance(a1, s1, dt);
        let v2 = ou_step_variance(a2, s2, dt);
        let c12 = ou_step_covariance(a1, a2, s1, s2, params.rho, dt);
        let l11 = v1.sqrt();
        let l21 = if l11 > 0.0 { c12 / l11 } else { 0.0 };
        let l22 = (v2 - l21 * l21).max(0.0).sqrt();
        FactorStepper {
            decay1: (a1 * dt).exp(),
            decay2: (a2 * dt).exp(),
            l11,
            l21,
            l22,
        }
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, y1: &mut f64, y2: &mut f64, rng: &mut R) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        *y1 = self.decay1 * *y1 + self.l11 * z1;
        *y2 = self.decay2 * *y2 + self.l21 * z1 + self.l22 * z2;
    }
}

fn check_horizon(state: &CohortState, market: &MarketParams, horizon: f64) -> Result<()> {
    let remaining = market.omega - state.x as f64 - state.t;
    if horizon > remaining + 1e-9 {
        return Err(Error::param(
            "horizon",
            format!("{horizon} years exceeds remaining lifetime {remaining} to omega"),
        ));
    }
    Ok(())
}

pub fn simulate_path<R: Rng + ?Sized>(
    params: &ModelParams,
    state: &CohortState,
    market: &MarketParams,
    measure: Measure,
    horizon: f64,
    config: &SimConfig,
    rng: &mut R,
) -> Result<PathSample> {
    let steps = config.steps_for(horizon)?;
    check_horizon(state, market, horizon)?;
    let dt = config.dt;
    let stepper = FactorStepper::new(params, state.x, measure, dt);

    let n = steps + 1;
    let mut path = PathSample {
        dt,
        times: Vec::with_capacity(n),
        y1: Vec::with_capacity(n),
        y2: Vec::with_capacity(n),
        mu: Vec::with_capacity(n),
        integrated_mu: Vec::with_capacity(n),
        survivor_index: Vec::with_capacity(n),
    };
    let clamp = |m: f64| {
        if config.clamp_mu_at_zero {
            m.max(0.0)
        } else {
            m
        }
    };
    let (mut y1, mut y2) = (state.y1, state.y2);
    let mut mu = clamp(y1 + y2);
    let mut integral = 0.0;
    path.times.push(0.0);
    path.y1.push(y1);
    path.y2.push(y2);
    path.mu.push(mu);
    path.integrated_mu.push(0.0);
    path.survivor_index.push(1.0);
    for i in 1..=steps {
        stepper.step(&mut y1, &mut y2, rng);
        let next = clamp(y1 + y2);
        integral += 0.5 * dt * (mu + next);
        mu = next;
        path.times.push(i as f64 * dt);
        path.y1.push(y1);
        path.y2.push(y2);
        path.mu.push(mu);
        path.integrated_mu.push(integral);
        path.survivor_index.push((-integral).exp());
    }
    Ok(path)
}

/// Trapezoidal `∫_0^horizon mu` without storing the path.
fn integrate_only<R: Rng + ?Sized>(
    stepper: &FactorStepper,
    state: &CohortState,
    steps: usize,
    config: &SimConfig,
    rng: &mut R,
) -> f64 {
    let clamp = |m: f64| {
        if config.clamp_mu_at_zero {
            m.max(0.0)
        } else {
            m
        }
    };
    let (mut y1, mut y2) = (state.y1, state.y2);
    let mut mu = clamp(y1 + y2);
    let mut acc = 0.0;
    for _ in 0..steps {
        stepper.step(&mut y1, &mut y2, rng);
        let next = clamp(y1 + y2);
        acc += mu + next;
        mu = next;
    }
    0.5 * config.dt * acc
}

/// Integrated intensity over `[t, t + horizon]` for `num_paths` independent
/// paths; path `i` uses stream `i` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn sample_integrated_intensity(
    params: &ModelParams,
    state: &CohortState,
    market: &MarketParams,
    measure: Measure,
    horizon: f64,
    config: &SimConfig,
    num_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let steps = config.steps_for(horizon)?;
    check_horizon(state, market, horizon)?;
    let stepper = FactorStepper::new(params, state.x, measure, config.dt);
    Ok(par::map_indexed(num_paths, exec, |i| {
        let mut rng = RngSpec::new(seed, i as u64).rng();
        integrate_only(&stepper, state, steps, config, &mut rng)
    }))
}

/// First-passage death-time sampler for a fixed intensity path.
///
/// The integrated intensity may be non-monotone when `mu` dips below zero;
/// the first crossing is located on its running maximum.
pub struct DeathTimeSampler<'a> {
    path: &'a PathSample,
    running_max: Vec<f64>,
}

impl<'a> DeathTimeSampler<'a> {
    pub fn new(path: &'a PathSample) -> Self {
        let mut running_max = Vec::with_capacity(path.integrated_mu.len());
        let mut m = f64::NEG_INFINITY;
        for &v in &path.integrated_mu {
            m = m.max(v);
            running_max.push(m);
        }
        DeathTimeSampler { path, running_max }
    }

    /// Smallest time at which the integrated intensity reaches `xi`,
    /// linearly interpolated within the crossing step; the path horizon if
    /// it is never reached.
    pub fn death_time(&self, xi: f64) -> f64 {
        let k = self.running_max.partition_point(|&m| m < xi);
        if k == self.running_max.len() {
            return self.path.horizon();
        }
        if k == 0 {
            return 0.0;
        }
        let lo = self.path.integrated_mu[k - 1];
        let hi = self.path.integrated_mu[k];
        let frac = ((xi - lo) / (hi - lo)).clamp(0.0, 1.0);
        self.path.times[k - 1] + frac * self.path.dt
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let xi = -(1.0 - u).ln();
        self.death_time(xi)
    }
}

/// `n` independent death times on `path` (inverse-transform exponentials).
pub fn simulate_death_times<R: Rng + ?Sized>(path: &PathSample, n: usize, rng: &mut R) -> Vec<f64> {
    let sampler = DeathTimeSampler::new(path);
    (0..n).map(|_| sampler.sample(rng)).collect()
}

/// Monte Carlo estimate with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub num_paths: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("{n} Monte Carlo samples")));
        }
        let mean = neumaier_sum(samples.iter().copied()) / n as f64;
        let ss = neumaier_sum(samples.iter().map(|v| (v - mean) * (v - mean)));
        let std_error = (ss / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
        Ok(McEstimate {
            estimate: mean,
            std_error,
            ci95: (mean - Z95 * std_error, mean + Z95 * std_error),
            num_paths: n,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }

    pub fn ci_width(&self) -> f64 {
        self.ci95.1 - self.ci95.0
    }
}

/// Discounted mean of `max(index(T) - K, 0)` over risk-adjusted paths at `t = 0`.
pub fn mc_caplet_price(
    spec: &CapletSpec,
    params: &ModelParams,
    market: &MarketParams,
    num_paths: usize,
    config: &SimConfig,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    if num_paths < 100 {
        return Err(Error::param(
            "num_paths",
            format!("need at least 100, got {num_paths}"),
        ));
    }
    spec.validate()?;
    let state = CohortState::initial(params, spec.x)?;
    let integrals = sample_integrated_intensity(
        params,
        &state,
        market,
        market.risk_adjusted(),
        spec.maturity,
        config,
        num_paths,
        seed,
        exec,
    )?;
    let scale = spec.notional * market.discount(spec.maturity);
    let payoffs: Vec<f64> = integrals
        .iter()
        .map(|&i| scale * ((-i).exp() - spec.strike).max(0.0))
        .collect();
    McEstimate::from_samples(&payoffs)
}

/// Monte Carlo estimate of `E[exp(-∫_t^T mu)]`.
#[allow(clippy::too_many_arguments)]
pub fn mc_survival(
    params: &ModelParams,
    state: &CohortState,
    market: &MarketParams,
    measure: Measure,
    maturity: f64,
    config: &SimConfig,
    num_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    let horizon = maturity - state.t;
    let integrals = sample_integrated_intensity(
        params, state, market, measure, horizon, config, num_paths, seed, exec,
    )?;
    let s: Vec<f64> = integrals.iter().map(|i| (-i).exp()).collect();
    McEstimate::from_samples(&s)
}
