use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::path_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadOptions {
    /// Iteration cap per run.
    pub max_iterations: usize,
    /// Runs after the first, each started from the best point so far.
    pub restarts: usize,
    /// Edge length of the initial simplex, in unconstrained coordinates.
    pub initial_step: f64,
    /// Standard deviation of the restart jitter.
    pub jitter: f64,
    /// A run converges once the objective spread over the simplex is below
    /// this and its diameter is below `x_tol`.
    pub f_tol: f64,
    pub x_tol: f64,
    pub seed: u64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iterations: 500, restarts: 3, initial_step: 0.25, jitter: 0.1, f_tol: 1e-14, x_tol: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// Best objective after each iteration, across all runs.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Whether at least one run met the convergence test.
    pub converged: bool,
}

struct Counted<'a, F> {
    f: &'a F,
    calls: std::sync::atomic::AtomicUsize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Counted<'_, F> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn eval_all(&self, xs: Vec<Vec<f64>>) -> Vec<(Vec<f64>, f64)> {
        xs.into_par_iter()
            .map(|x| {
                let v = self.eval(&x);
                (x, v)
            })
            .collect()
    }
}

fn order(simplex: &mut [(Vec<f64>, f64)]) {
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect()
}

/// One Nelder-Mead run with the standard coefficients (1, 2, 1/2, 1/2).
/// Returns the simplex, the iterations used and whether it converged.
fn run<F: Fn(&[f64]) -> f64 + Sync>(
    obj: &Counted<F>,
    start: &[f64],
    opts: &NelderMeadOptions,
    trace: &mut Vec<f64>,
    best_so_far: &mut f64,
) -> (Vec<(Vec<f64>, f64)>, usize, bool) {
    let n = start.len();
    let mut points = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += opts.initial_step;
        points.push(p);
    }
    let mut simplex = obj.eval_all(points);
    order(&mut simplex);
    let record = |trace: &mut Vec<f64>, best: &mut f64, f: f64| {
        *best = best.min(f);
        trace.push(*best);
    };
    for it in 0..opts.max_iterations {
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let diameter = simplex[1..]
            .iter()
            .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if worst - best <= opts.f_tol && diameter <= opts.x_tol {
            return (simplex, it, true);
        }
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|(p, _)| p[k]).sum::<f64>() / n as f64).collect();
        let xr = lerp(&centroid, &simplex[n].0, -1.0);
        let fr = obj.eval(&xr);
        if fr < best {
            let xe = lerp(&centroid, &simplex[n].0, -2.0);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = lerp(&centroid, &xr, 0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &simplex[n].0, 0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                let shrunk = obj.eval_all(simplex[1..].iter().map(|(p, _)| lerp(&anchor, p, 0.5)).collect());
                simplex.splice(1.., shrunk);
            }
        }
        order(&mut simplex);
        record(trace, best_so_far, simplex[0].1);
    }
    (simplex, opts.max_iterations, false)
}

/// Minimises `f` from `start`, then restarts from jittered copies of the best
/// point. Non-finite objective values count as `+inf`, so such trial points
/// are never accepted. The trace records the running best and never increases.
pub fn nelder_mead<F: Fn(&[f64]) -> f64 + Sync>(f: &F, start: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let obj = Counted { f, calls: 0.into() };
    let mut trace = Vec::new();
    let mut best = (start.to_vec(), obj.eval(start));
    let mut best_f = best.1;
    trace.push(best_f);
    if start.is_empty() {
        return Minimum { x: best.0, f: best.1, trace, iterations: 0, evaluations: 1, converged: true };
    }
    let (mut iterations, mut converged) = (0, false);
    for r in 0..=opts.restarts {
        let from = if r == 0 {
            best.0.clone()
        } else {
            let mut rng = path_rng(opts.seed, r as u64);
            best.0.iter().map(|x| x + opts.jitter * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let (simplex, its, ok) = run(&obj, &from, opts, &mut trace, &mut best_f);
        iterations += its;
        converged |= ok;
        if simplex[0].1 < best.1 {
            best = simplex[0].clone();
        }
    }
    let evaluations = obj.calls.into_inner();
    Minimum { x: best.0, f: best.1, trace, iterations, evaluations, converged }
}
