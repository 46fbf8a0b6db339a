//! Box-constrained Nelder–Mead with seeded multistart.
//!
//! The simplex lives in unit-cube coordinates so that parameters with very
//! different scales move comparably; trial points are projected back onto
//! the box.

use rand::Rng;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::sim::RngSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::param(
                "bounds",
                "lower/upper must be non-empty and equal length",
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::param(
                "bounds",
                "each lower bound must be finite and <= its upper bound",
            ));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| {
                if u > l {
                    ((v - l) / (u - l)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn scale_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(s, (l, h))| (l + s * (h - l)).clamp(*l, *h))
            .collect()
    }

    /// Uniform draw inside the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + rng.random::<f64>() * (u - l))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Relative spread of simplex values at which a run stops.
    pub f_tol: f64,
    /// Simplex diameter (unit-cube coordinates) at which a run stops.
    pub x_tol: f64,
    /// Initial simplex edge in unit-cube coordinates.
    pub initial_step: f64,
    /// Fresh-simplex restarts from the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 20_000,
            f_tol: 1e-15,
            x_tol: 1e-12,
            initial_step: 0.1,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best objective value after every iteration.
    pub trace: Vec<f64>,
}

impl NelderMead {
    pub fn minimize<F>(&self, f: &F, x0: &[f64], bounds: &Bounds) -> Minimum
    where
        F: Fn(&[f64]) -> f64 + ?Sized,
    {
        let eval = |u: &[f64]| {
            let v = f(&bounds.scale_unit(u));
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut best_u = bounds.to_unit(x0);
        let mut best_f = eval(&best_u);
        let mut evals = 1;
        let mut trace = vec![best_f];
        let mut converged = false;
        let mut step = self.initial_step;
        for _ in 0..=self.restarts {
            let run = self.run(
                &eval,
                &best_u,
                step,
                self.max_evals.saturating_sub(evals),
                &mut trace,
            );
            evals += run.evals;
            let improved = run.value < best_f && (best_f - run.value) > 1e-14 * best_f.abs();
            if run.value <= best_f {
                best_u = run.u;
                best_f = run.value;
            }
            converged = run.converged;
            if !improved || evals >= self.max_evals {
                break;
            }
            step = (step * 0.5).max(1e-4);
        }
        Minimum {
            x: bounds.scale_unit(&best_u),
            value: best_f,
            evals,
            converged,
            trace,
        }
    }

    fn run<E>(
        &self,
        eval: &E,
        start: &[f64],
        step: f64,
        budget: usize,
        trace: &mut Vec<f64>,
    ) -> RunResult
    where
        E: Fn(&[f64]) -> f64,
    {
        let d = start.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        simplex.push((start.to_vec(), eval(start)));
        for i in 0..d {
            let mut v = start.to_vec();
            v[i] = if v[i] + step <= 1.0 {
                v[i] + step
            } else {
                v[i] - step
            };
            let fv = eval(&v);
            simplex.push((v, fv));
        }
        let mut evals = d + 1;
        let project = |v: Vec<f64>| v.into_iter().map(|s| s.clamp(0.0, 1.0)).collect::<Vec<_>>();
        let mut converged = false;

        while evals < budget {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            trace.push(trace.last().map_or(f_best, |&t: &f64| t.min(f_best)));
            let f_worst = simplex[d].1;
            let spread = simplex
                .iter()
                .skip(1)
                .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0f64, f64::max);
            if (f_worst - f_best).abs() <= self.f_tol * (f_best.abs() + 1e-300)
                || spread <= self.x_tol
            {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; d];
            for (v, _) in simplex.iter().take(d) {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / d as f64;
                }
            }
            let along = |coef: f64| -> Vec<f64> {
                project(
                    centroid
                        .iter()
                        .zip(&simplex[d].0)
                        .map(|(c, w)| c + coef * (c - w))
                        .collect(),
                )
            };

            let reflected = along(1.0);
            let f_r = eval(&reflected);
            evals += 1;
            if f_r < simplex[0].1 {
                let expanded = along(2.0);
                let f_e = eval(&expanded);
                evals += 1;
                simplex[d] = if f_e < f_r {
                    (expanded, f_e)
                } else {
                    (reflected, f_r)
                };
                continue;
            }
            if f_r < simplex[d - 1].1 {
                simplex[d] = (reflected, f_r);
                continue;
            }
            let (contracted, f_c) = if f_r < simplex[d].1 {
                let c = along(0.5);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = along(-0.5);
                let fc = eval(&c);
                (c, fc)
            };
            evals += 1;
            if f_c < simplex[d].1.min(f_r) {
                simplex[d] = (contracted, f_c);
                continue;
            }
            // shrink towards the best vertex
            let best = simplex[0].0.clone();
            for (v, fv) in simplex.iter_mut().skip(1) {
                let shrunk: Vec<f64> = best
                    .iter()
                    .zip(v.iter())
                    .map(|(b, x)| b + 0.5 * (x - b))
                    .collect();
                *fv = eval(&shrunk);
                *v = shrunk;
            }
            evals += d;
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (u, value) = simplex.swap_remove(0);
        RunResult {
            u,
            value,
            evals,
            converged,
        }
    }
}

struct RunResult {
    u: Vec<f64>,
    value: f64,
    evals: usize,
    converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartResult {
    pub best: Minimum,
    /// Final objective value of every start, in start order.
    pub values: Vec<f64>,
}

/// Run `starts` independent Nelder–Mead searches. Start 0 is `x0` when given;
/// the rest are drawn uniformly from `start_box` using stream `i` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn multistart<F>(
    f: &F,
    bounds: &Bounds,
    start_box: &Bounds,
    x0: Option<&[f64]>,
    starts: usize,
    seed: u64,
    nm: &NelderMead,
    exec: Execution,
) -> Result<MultistartResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    if starts == 0 {
        return Err(Error::param("starts", "need at least one start"));
    }
    if start_box.dim() != bounds.dim() {
        return Err(Error::param("start_box", "dimension differs from bounds"));
    }
    let runs = par::map_indexed(starts, exec, |i| {
        let start = match (i, x0) {
            (0, Some(x)) => x.to_vec(),
            _ => start_box.sample(&mut RngSpec::new(seed, i as u64).rng()),
        };
        nm.minimize(f, &start, bounds)
    });
    let values = runs.iter().map(|m| m.value).collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start");
    Ok(MultistartResult { best, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let b = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let m = NelderMead::default().minimize(&rosenbrock, &[-1.2, 1.0], &b);
        assert!(m.value < 1e-14, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_active_bounds() {
        let b = Bounds::new(vec![2.0, -1.0], vec![3.0, 1.0]).unwrap();
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let m = NelderMead::default().minimize(&f, &[2.5, 0.5], &b);
        assert!(b.contains(&m.x));
        assert!((m.x[0] - 2.0).abs() < 1e-9 && m.x[1].abs() < 1e-6);
    }

    #[test]
    fn trace_never_increases() {
        let b = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let m = NelderMead::default().minimize(&rosenbrock, &[0.5, -1.5], &b);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn multistart_is_deterministic_and_escapes_local_minima() {
        // tilted double well: local minimum near -1.97, global near 2.03
        let f = |x: &[f64]| (x[0] * x[0] - 4.0).powi(2) - x[0];
        let b = Bounds::new(vec![-3.0], vec![3.0]).unwrap();
        let nm = NelderMead::default();
        let a = multistart(&f, &b, &b, Some(&[-2.0]), 8, 7, &nm, Execution::Parallel).unwrap();
        let c = multistart(&f, &b, &b, Some(&[-2.0]), 8, 7, &nm, Execution::Sequential).unwrap();
        assert_eq!(a, c);
        assert!(a.values[0] > a.best.value);
        assert!(a.best.x[0] > 2.0 && a.best.x[0] < 2.1);
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![], vec![]).is_err());
    }
}
