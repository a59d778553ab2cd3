//! Derivative-free minimization: Nelder-Mead simplex with seeded multistart.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qops::random::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop once the objective spread over the simplex falls below this.
    pub f_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_tol: 1e-8,
            initial_step: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let evals = std::cell::Cell::new(0usize);
        let eval = |x: &[f64]| {
            evals.set(evals.get() + 1);
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let fx = eval(&x);
            simplex.push((x, fx));
        }

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut converged = false;
        while evals.get() < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[n].1 - simplex[0].1 <= self.f_tol {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(alpha);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(rho);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + sigma * (x - b)).collect();
                        let fx = eval(&x);
                        *v = (x, fx);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, fx) = simplex.swap_remove(0);
        Minimum {
            x,
            f: fx,
            evals: evals.get(),
            converged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultistartOptions {
    pub starts: usize,
    pub seed: u64,
    /// Random starts are drawn uniformly from `[-range, range]^dim`.
    pub range: f64,
    pub local: NelderMead,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            range: std::f64::consts::PI,
            local: NelderMead::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub best: Minimum,
    pub best_start: usize,
    /// Final objective of every start, in start order.
    pub finals: Vec<f64>,
    pub total_evals: usize,
}

/// Runs `starts` local searches: start 0 from `x0`, the others from seeded
/// random points (stream `i` of the seed). The lowest objective wins; exact
/// ties go to the earliest start.
pub fn multistart<F>(f: F, x0: &[f64], opts: &MultistartOptions) -> MultistartResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let starts = opts.starts.max(1);
    let results: Vec<Minimum> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let start = if i == 0 {
                x0.to_vec()
            } else {
                let mut rng = stream_rng(opts.seed, i as u64);
                (0..x0.len()).map(|_| rng.random_range(-opts.range..=opts.range)).collect()
            };
            opts.local.minimize(&f, &start)
        })
        .collect();
    let mut best_start = 0;
    for (i, r) in results.iter().enumerate() {
        if r.f < results[best_start].f {
            best_start = i;
        }
    }
    MultistartResult {
        finals: results.iter().map(|r| r.f).collect(),
        total_evals: results.iter().map(|r| r.evals).sum(),
        best: results[best_start].clone(),
        best_start,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let nm = NelderMead {
            max_evals: 5000,
            f_tol: 1e-14,
            initial_step: 0.5,
        };
        let m = nm.minimize(rosenbrock, &[-1.2, 1.0]);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn respects_evaluation_budget() {
        let nm = NelderMead {
            max_evals: 50,
            f_tol: 0.0,
            initial_step: 0.5,
        };
        let m = nm.minimize(rosenbrock, &[-1.2, 1.0]);
        assert!(!m.converged);
        assert!(m.evals <= 50 + 3);
    }

    #[test]
    fn multistart_escapes_local_minimum_and_is_deterministic() {
        // double well with the deeper minimum near x = -1
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.3 * x[0];
        let opts = MultistartOptions {
            starts: 8,
            seed: 3,
            range: 2.0,
            local: NelderMead::default(),
        };
        let a = multistart(f, &[1.0], &opts);
        let b = multistart(f, &[1.0], &opts);
        assert!(a.best.x[0] < 0.0);
        assert_eq!(a.best.x, b.best.x);
        assert_eq!(a.best_start, b.best_start);
        assert_eq!(a.finals.len(), 8);
    }
}
