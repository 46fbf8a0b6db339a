//! Numerical kernels shared by the closed forms and the simulator.

use std::f64::consts::SQRT_2;

/// Below this `|a * dt|` the exponential kernels switch to their series limits.
pub const SMALL_RATE: f64 = 1e-8;

/// `(e^{a dt} - 1) / a`, the integral of `e^{a w}` over `[0, dt]`.
pub fn growth_integral(a: f64, dt: f64) -> f64 {
    let u = a * dt;
    if u.abs() < SMALL_RATE {
        dt * (1.0 + 0.5 * u)
    } else {
        u.exp_m1() / a
    }
}

/// Conditional variance of an OU factor over one step:
/// `sigma^2 (e^{2 a dt} - 1) / (2 a)`.
pub fn ou_step_variance(a: f64, sigma: f64, dt: f64) -> f64 {
    sigma * sigma * growth_integral(2.0 * a, dt)
}

/// Conditional covariance of two OU innovations sharing correlation `rho`.
pub fn ou_step_covariance(a: f64, b: f64, sigma_a: f64, sigma_b: f64, rho: f64, dt: f64) -> f64 {
    rho * sigma_a * sigma_b * growth_integral(a + b, dt)
}

/// `(e^{a dt} - 1 - a dt) / a^2`.
fn second_growth(a: f64, dt: f64) -> f64 {
    let u = a * dt;
    if u.abs() <= 1.0 {
        // dt^2 * sum_k u^k / (k+2)!
        let mut term = 0.5;
        let mut sum = term;
        for k in 1..40 {
            term *= u / (k as f64 + 2.0);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        dt * dt * sum
    } else {
        (u.exp_m1() - u) / (a * a)
    }
}

/// `∫_0^dt q_a(w) q_b(w) dw` with `q_a(w) = (e^{a w} - 1) / a`.
///
/// This is the building block of the variance of the integrated intensity:
/// `Var ∫ Y_k = sigma_k^2 I(a_k, a_k)` and
/// `Cov(∫ Y_1, ∫ Y_2) = rho sigma_1 sigma_2 I(a_1, a_2)`.
pub fn ou_cross_integral(a: f64, b: f64, dt: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    let (small, large) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };
    let us = small.abs() * dt;
    let ul = large.abs() * dt;
    if ul <= 1.0 {
        cross_series(a * dt, b * dt) * dt.powi(3)
    } else if us <= 0.5 {
        let e_small = growth_integral(small, dt);
        let e_large = growth_integral(large, dt);
        ((large * dt).exp() * e_small - e_large) / (large * (small + large))
            - second_growth(small, dt) / large
    } else {
        (growth_integral(a + b, dt) - growth_integral(a, dt) - growth_integral(b, dt) + dt)
            / (a * b)
    }
}

/// `sum_{k>=2} 1/(k+1)! sum_{j=1}^{k-1} C(k,j) u^{j-1} v^{k-1-j}`, valid for |u|,|v| <= 1.
fn cross_series(u: f64, v: f64) -> f64 {
    let mut sum = 0.0;
    let mut inv_fact = 1.0 / 6.0; // 1/(k+1)! at k = 2
    for k in 2..64usize {
        let mut h = 0.0;
        let mut binom = k as f64; // C(k, 1)
        for j in 1..k {
            h += binom * u.powi(j as i32 - 1) * v.powi((k - 1 - j) as i32);
            binom *= (k - j) as f64 / (j + 1) as f64;
        }
        let term = inv_fact * h;
        sum += term;
        if k > 4 && term.abs() < 1e-18 * sum.abs() {
            break;
        }
        inv_fact /= (k + 2) as f64;
    }
    sum
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Compensated (Neumaier) summation; order-dependent only through the input order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
