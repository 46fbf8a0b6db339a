use std::ops::RangeInclusive;

use rand::Rng;
use rand_distr::StandardNormal;

use super::MortalityTable;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::sim::RngSpec;

/// Starting factor-2 level for `age`, log-linear through the smallest and
/// largest calibrated ages. With a single calibrated age the real-world
/// factor-2 drift at that age supplies the slope.
fn baseline_y2(params: &ModelParams, age: u32) -> Result<f64> {
    let (&lo, &y_lo) = params
        .y2_by_age
        .iter()
        .next()
        .ok_or(Error::MissingY2(age))?;
    let (&hi, &y_hi) = params.y2_by_age.iter().next_back().expect("non-empty");
    let slope = if hi > lo && y_lo > 0.0 && y_hi > 0.0 {
        (y_hi / y_lo).ln() / (hi - lo) as f64
    } else {
        params.alpha * lo as f64 + params.beta
    };
    Ok(y_lo * (slope * (age as f64 - lo as f64)).exp())
}

/// Simulate a table of central death rates.
///
/// Each cell is `y1 + y2(age)` plus a cohort noise term. The noise starts at
/// zero where a cohort enters the table (youngest age or first year) and
/// follows the cohort diagonal with yearly increments
/// `sigma1 dW1 + sigma e^{gamma x} dW2`, so the variance of `delta_m` at age
/// `x` is `model_variance_delta_mu(params, x, 1)`. Rates are floored at zero.
pub fn synthetic_table(
    params: &ModelParams,
    ages: RangeInclusive<u32>,
    years: RangeInclusive<i32>,
    seed: u64,
) -> Result<MortalityTable> {
    let (a0, a1) = (*ages.start(), *ages.end());
    let (t0, t1) = (*years.start(), *years.end());
    if a1 < a0 || t1 < t0 {
        return Err(Error::param("ages", "empty age or year range"));
    }
    let n_ages = (a1 - a0 + 1) as usize;
    let n_years = (t1 - t0 + 1) as usize;
    let level = ages
        .clone()
        .map(|a| Ok(params.y1 + baseline_y2(params, a)?))
        .collect::<Result<Vec<f64>>>()?;
    let rho_c = (1.0 - params.rho * params.rho).max(0.0).sqrt();

    let mut rows = vec![vec![0.0; n_years]; n_ages];
    // diagonal k holds cells with j - i = k
    for k in -(n_ages as i64 - 1)..n_years as i64 {
        let mut rng = RngSpec::new(seed, (k + n_ages as i64 - 1) as u64).rng();
        let (mut i, mut j) = if k >= 0 {
            (0usize, k as usize)
        } else {
            ((-k) as usize, 0usize)
        };
        let mut noise = 0.0;
        loop {
            rows[i][j] = (level[i] + noise).max(0.0);
            if i + 1 == n_ages || j + 1 == n_years {
                break;
            }
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let s2 = params.sigma2(a0 + i as u32);
            noise += params.sigma1 * z1 + s2 * (params.rho * z1 + rho_c * z2);
            i += 1;
            j += 1;
        }
    }
    MortalityTable::new(a0, t0, rows)
}
