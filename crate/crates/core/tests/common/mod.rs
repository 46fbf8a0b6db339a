#![allow(dead_code)]

use longevity_core::ModelParams;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `(e^{z} - 1) / z` with its limit at 0.
fn expm1_ratio(z: f64) -> f64 {
    if z.abs() < 1e-12 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// `Cov(Y_i(u), Y_j(w))` of two OU factors started at fixed values.
fn ou_cov(ai: f64, aj: f64, si: f64, sj: f64, rho: f64, u: f64, w: f64) -> f64 {
    let m = u.min(w);
    // ∫_0^m e^{ai (u - s)} e^{aj (w - s)} ds
    let integral = (ai * (u - m) + aj * (w - m)).exp() * m * expm1_ratio((ai + aj) * m);
    rho * si * sj * integral
}

/// `Var(∫_0^tau mu)` by two-dimensional Gauss–Legendre quadrature of the
/// intensity covariance, split along the diagonal where it has a kink.
pub fn integrated_variance_by_quadrature(
    a1: f64,
    a2: f64,
    s1: f64,
    s2: f64,
    rho: f64,
    tau: f64,
) -> f64 {
    let cov = |u: f64, w: f64| {
        ou_cov(a1, a1, s1, s1, 1.0, u, w)
            + ou_cov(a2, a2, s2, s2, 1.0, u, w)
            + ou_cov(a1, a2, s1, s2, rho, u, w)
            + ou_cov(a2, a1, s2, s1, rho, u, w)
    };
    let nodes = gauss_legendre(40);
    let mut total = 0.0;
    // triangle u <= w, doubled by symmetry
    for &(xw, ww) in &nodes {
        let w = 0.5 * tau * (xw + 1.0);
        let mut inner = 0.0;
        for &(xu, wu) in &nodes {
            let u = 0.5 * w * (xu + 1.0);
            inner += wu * cov(u, w);
        }
        total += ww * 0.5 * w * inner;
    }
    2.0 * 0.5 * tau * total
}

/// Kolmogorov–Smirnov distance between sorted samples and a CDF; samples
/// equal to `cap` are treated as censored atoms there.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64, cap: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut below = 0usize;
    for (i, &t) in sorted.iter().enumerate() {
        if t >= cap {
            break;
        }
        let f = cdf(t);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
        below = i + 1;
    }
    d.max((below as f64 / n - cdf(cap)).abs())
}

/// Intensity constant at `c`: both volatilities and drifts zero.
pub fn constant_intensity(c: f64) -> ModelParams {
    let mut p = ModelParams::australian_males_2008().deterministic();
    p.alpha1 = 0.0;
    p.alpha = 0.0;
    p.beta = 0.0;
    p.y1 = c;
    for y2 in p.y2_by_age.values_mut() {
        *y2 = 0.0;
    }
    p
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn intensity_cov(p: &ModelParams, x: u32, u: f64, w: f64) -> f64 {
    let a1 = p.alpha1;
    let a2 = p.alpha * x as f64 + p.beta;
    let s1 = p.sigma1;
    let s2 = p.sigma * (p.gamma * x as f64).exp();
    ou_cov(a1, a1, s1, s1, 1.0, u, w)
        + ou_cov(a2, a2, s2, s2, 1.0, u, w)
        + ou_cov(a1, a2, s1, s2, p.rho, u, w)
        + ou_cov(a2, a1, s2, s1, p.rho, u, w)
}

/// `Cov(∫_0^t mu, ∫_0^u mu)` under the real-world measure, by quadrature.
pub fn integrated_covariance(p: &ModelParams, x: u32, t: f64, u: f64) -> f64 {
    let (t, u) = if t <= u { (t, u) } else { (u, t) };
    let a1 = p.alpha1;
    let a2 = p.alpha * x as f64 + p.beta;
    let s2 = p.sigma * (p.gamma * x as f64).exp();
    let var_t = integrated_variance_by_quadrature(a1, a2, p.sigma1, s2, p.rho, t);
    if u == t {
        return var_t;
    }
    let nodes = gauss_legendre(40);
    let mut cross = 0.0;
    for &(xa, wa) in &nodes {
        let a = 0.5 * t * (xa + 1.0);
        for &(xb, wb) in &nodes {
            let b = t + 0.5 * (u - t) * (xb + 1.0);
            cross += wa * wb * intensity_cov(p, x, a, b);
        }
    }
    var_t + 0.25 * t * (u - t) * cross
}

/// Mean of `∫_0^t mu` under the real-world measure.
pub fn integrated_mean(p: &ModelParams, x: u32, t: f64) -> f64 {
    let a2 = p.alpha * x as f64 + p.beta;
    let growth = |a: f64| {
        if a.abs() < 1e-12 {
            t
        } else {
            (a * t).exp_m1() / a
        }
    };
    growth(p.alpha1) * p.y1 + growth(a2) * p.y2_by_age[&x]
}

/// Per-policy standard deviation of the swap-hedged surplus (unhedged for
/// `t_hat = 0`): the systematic part follows from the lognormal survivor
/// index, the idiosyncratic part from the conditional variance of each
/// annuity-certain liability.
pub fn swap_hedged_std(p: &ModelParams, x: u32, r: f64, horizon: u32, t_hat: u32, n: u32) -> f64 {
    let h = horizon as usize;
    let times: Vec<f64> = (1..=horizon).map(f64::from).collect();
    let disc: Vec<f64> = times.iter().map(|t| (-r * t).exp()).collect();
    let mut cov = vec![vec![0.0; h]; h];
    for i in 0..h {
        for j in i..h {
            let c = integrated_covariance(p, x, times[i], times[j]);
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    let s: Vec<f64> = (0..h)
        .map(|i| (0.5 * cov[i][i] - integrated_mean(p, x, times[i])).exp())
        .collect();
    let mut systematic = 0.0;
    let mut idiosyncratic = 0.0;
    for i in 0..h {
        for j in 0..h {
            let joint = s[i] * s[j] * cov[i][j].exp();
            if i >= t_hat as usize && j >= t_hat as usize {
                systematic += disc[i] * disc[j] * (joint - s[i] * s[j]);
            }
            idiosyncratic += disc[i] * disc[j] * (s[i.max(j)] - joint);
        }
    }
    (systematic + idiosyncratic / n as f64).sqrt()
}
