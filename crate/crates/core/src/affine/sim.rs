use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;
use crate::pathset::{Observation, PathSet, TIME_EPS};
use crate::rng::path_rng;

use super::curves::{bond_exponents, spread_exponents};
use super::riccati::RiccatiOptions;
use super::spec::AffineModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Inserted as extra nodes when they fall between steps.
    pub observation_times: Vec<f64>,
    /// Absolute maturities recorded at each observation (those `>= t`).
    pub maturities: Vec<f64>,
}

/// Lower-triangular `L` (row-major, `n x n`) with `L L^T = m` for a positive
/// semidefinite `m`; pivots below roundoff are zeroed with their column.
pub(crate) fn psd_factor(m: &[f64], n: usize, l: &mut [f64]) {
    l.iter_mut().for_each(|v| *v = 0.0);
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 1e-14 * scale {
            continue;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

/// Exact one-step law of the Gaussian part over a step of length `h`:
/// `X' = E X + m + noise`, `noise ~ N(0, L L^T)` jointly with the `Y` noise.
struct GaussianStep {
    /// `exp(beta h)`, row-major.
    e: Vec<f64>,
    mean: Vec<f64>,
    chol: Vec<f64>,
}

impl GaussianStep {
    fn new(spec: &AffineModelSpec, h: f64) -> Self {
        let (d, n) = (spec.x_dim(), spec.y_dim());
        let beta = DMatrix::from_fn(d, d, |i, k| spec.x.beta[i][k]);
        let b = nalgebra::DVector::from_column_slice(&spec.x.b);
        let c0 = spec.joint_constant_cov();
        let gl = gauss_legendre(24);
        let mut mean = nalgebra::DVector::zeros(d);
        let mut cov = DMatrix::zeros(d + n, d + n);
        for (s, w) in gl.mapped(0.0, h) {
            // Noise injected at h - s has been propagated by exp(beta s).
            let es = (&beta * s).exp();
            mean += (&es * &b) * w;
            let mut big = DMatrix::identity(d + n, d + n);
            big.view_mut((0, 0), (d, d)).copy_from(&es);
            cov += (&big * &c0 * big.transpose()) * w;
        }
        let mut chol = vec![0.0; (d + n) * (d + n)];
        psd_factor(&row_major(&cov), d + n, &mut chol);
        Self { e: row_major(&(&beta * h).exp()), mean: mean.iter().copied().collect(), chol }
    }
}

/// `out = L xi` for row-major lower-triangular `L`.
fn lower_mul(l: &[f64], xi: &[f64], out: &mut [f64]) {
    let n = xi.len();
    for i in 0..n {
        out[i] = (0..=i).map(|k| l[i * n + k] * xi[k]).sum();
    }
}

enum Stepper {
    Gaussian(HashMap<u64, GaussianStep>),
    Euler,
}

struct Recorder {
    /// Per observation: `(maturity, (phi0, psi0), [(phi_i, psi_i)])`.
    obs: Vec<(f64, Vec<RecordAt>)>,
}

struct RecordAt {
    bond: (f64, Vec<f64>),
    spreads: Vec<(f64, Vec<f64>)>,
}

fn nodes(cfg: &AffineSimConfig) -> Result<Vec<f64>> {
    if !(cfg.dt > 0.0) || !(cfg.horizon > 0.0) {
        return Err(Error::InvalidInput(format!("dt {} and horizon {} must be positive", cfg.dt, cfg.horizon)));
    }
    if cfg.dt > cfg.horizon + TIME_EPS {
        return Err(Error::StepTooLarge { dt: cfg.dt, horizon: cfg.horizon });
    }
    let mut t: Vec<f64> = (0..)
        .map(|k| k as f64 * cfg.dt)
        .take_while(|&s| s < cfg.horizon - TIME_EPS)
        .chain(std::iter::once(cfg.horizon))
        .collect();
    for &o in &cfg.observation_times {
        if !(-TIME_EPS..=cfg.horizon + TIME_EPS).contains(&o) {
            return Err(Error::InvalidInput(format!("observation time {o} lies outside [0, {}]", cfg.horizon)));
        }
        t.push(o.clamp(0.0, cfg.horizon));
    }
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
    Ok(t)
}

/// Simulates `(X, Y, Z)` and records bonds and spreads from the affine formulas
/// at the realised states. Gaussian specs (no positive coordinates) step
/// exactly in law; square-root specs use full-truncation Euler. Jumps are
/// added at the end of each step; `Y` drift and `Z` use the trapezoid rule.
pub fn simulate_affine(spec: &AffineModelSpec, cfg: &AffineSimConfig) -> Result<PathSet> {
    spec.validate()?;
    if cfg.n_paths == 0 {
        return Err(Error::EmptyPathSet);
    }
    let times = nodes(cfg)?;
    let (d, n) = (spec.x_dim(), spec.y_dim());
    let opts = RiccatiOptions::default();
    let mut obs_times: Vec<f64> = cfg.observation_times.iter().map(|&o| o.clamp(0.0, cfg.horizon)).collect();
    obs_times.sort_by(f64::total_cmp);
    obs_times.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
    let recorder = Recorder {
        obs: obs_times
            .iter()
            .map(|&t| {
                let at = cfg
                    .maturities
                    .iter()
                    .filter(|&&mt| mt >= t - TIME_EPS)
                    .map(|&mt| {
                        let tau = (mt - t).max(0.0);
                        Ok(RecordAt {
                            bond: bond_exponents(spec, tau, &opts)?,
                            spreads: (0..spec.u.len())
                                .map(|i| spread_exponents(spec, tau, i, &opts))
                                .collect::<Result<_>>()?,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok((t, at))
            })
            .collect::<Result<_>>()?,
    };
    let stepper = if spec.state.pos_dims == 0 {
        let mut steps = HashMap::new();
        for w in times.windows(2) {
            let h = w[1] - w[0];
            steps.entry(h.to_bits()).or_insert_with(|| GaussianStep::new(spec, h));
        }
        Stepper::Gaussian(steps)
    } else {
        Stepper::Euler
    };
    let beta: Vec<f64> = spec.x.beta.iter().flatten().copied().collect();
    let c0 = row_major(&spec.joint_constant_cov());
    let joint_cov = |x: &[f64], out: &mut [f64]| {
        out.copy_from_slice(&c0);
        for k in 0..spec.state.pos_dims {
            if let Some(alpha) = spec.alpha(k) {
                let xk = x[k].max(0.0);
                for (i, row) in alpha.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        out[i * (d + n) + j] += xk * v;
                    }
                }
            }
        }
    };
    let (y_drift, y_loading) = spec.y.drift();
    let has_y_noise = spec.y.noise().is_some();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let run_path = |p: usize| -> Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        let mut rng = path_rng(cfg.seed, p as u64);
        let mut x = spec.x0.clone();
        let mut y = spec.y0.clone();
        let mut z = 0.0f64;
        let mut xi = vec![0.0f64; d + n];
        let mut noise = vec![0.0f64; d + n];
        let mut x_new = vec![0.0f64; d];
        let mut cov = vec![0.0f64; (d + n) * (d + n)];
        let mut chol = vec![0.0f64; (d + n) * (d + n)];
        let mut out = Vec::with_capacity(recorder.obs.len());
        let mut next = 0;
        let mut record = |t: f64, x: &[f64], y: &[f64], z: f64, out: &mut Vec<_>| {
            while next < recorder.obs.len() && (recorder.obs[next].0 - t).abs() <= TIME_EPS {
                let at = &recorder.obs[next].1;
                let discount: Vec<f64> = at.iter().map(|r| (r.bond.0 + dot(&r.bond.1, x)).exp()).collect();
                let spreads = (0..spec.u.len())
                    .map(|i| {
                        let uy = dot(&spec.u[i], y);
                        at.iter()
                            .map(|r| {
                                let (pi, si) = &r.spreads[i];
                                (uy + pi - r.bond.0
                                    + si.iter().zip(&r.bond.1).zip(x).map(|((a, b), x)| (a - b) * x).sum::<f64>())
                                .exp()
                            })
                            .collect()
                    })
                    .collect();
                out.push(((-z).exp(), discount, spreads));
                next += 1;
            }
        };
        record(times[0], &x, &y, z, &mut out);
        for w in times.windows(2) {
            let h = w[1] - w[0];
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let dn = d + n;
            match &stepper {
                Stepper::Gaussian(steps) => {
                    let st = &steps[&h.to_bits()];
                    lower_mul(&st.chol, &xi, &mut noise);
                    for i in 0..d {
                        x_new[i] = dot(&st.e[i * d..(i + 1) * d], &x) + st.mean[i] + noise[i];
                    }
                }
                Stepper::Euler => {
                    joint_cov(&x, &mut cov);
                    cov.iter_mut().for_each(|c| *c *= h);
                    psd_factor(&cov, dn, &mut chol);
                    lower_mul(&chol, &xi, &mut noise);
                    for i in 0..d {
                        x_new[i] = x[i] + (spec.x.b[i] + dot(&beta[i * d..(i + 1) * d], &x)) * h + noise[i];
                    }
                }
            }
            for jump in &spec.x.jumps {
                let rate = jump.intensity + (0..d).map(|k| jump.loading(k) * x[k].max(0.0)).sum::<f64>();
                if rate * h > 0.0 {
                    let count: f64 = Poisson::new(rate * h).map(|dist| dist.sample(&mut rng)).unwrap_or(0.0);
                    if count > 0.0 {
                        for (xn, s) in x_new.iter_mut().zip(&jump.size) {
                            *xn += count * s;
                        }
                    }
                }
            }
            // Trapezoid: average of the linear functionals at both ends.
            let mid = |c: &[f64]| 0.5 * (dot(c, &x) + dot(c, &x_new));
            for j in 0..n {
                y[j] += h * (y_drift[j] + mid(&y_loading[j])) + if has_y_noise { noise[d + j] } else { 0.0 };
            }
            z -= h * (spec.rate.l + mid(&spec.rate.lambda));
            std::mem::swap(&mut x, &mut x_new);
            record(w[1], &x, &y, z, &mut out);
        }
        out
    };
    let paths: Vec<_> = (0..cfg.n_paths).into_par_iter().with_min_len(64).map(run_path).collect();

    let observations = recorder
        .obs
        .iter()
        .enumerate()
        .map(|(o, (t, _))| {
            let maturities: Vec<f64> = cfg.maturities.iter().copied().filter(|&mt| mt >= t - TIME_EPS).collect();
            let mut obs = Observation {
                time: *t,
                maturities,
                numeraire: Vec::with_capacity(paths.len()),
                discount: Vec::new(),
                spreads: vec![Vec::new(); spec.u.len()],
            };
            for p in &paths {
                let (bank, disc, spreads) = &p[o];
                obs.numeraire.push(*bank);
                obs.discount.extend_from_slice(disc);
                for (dst, src) in obs.spreads.iter_mut().zip(spreads) {
                    dst.extend_from_slice(src);
                }
            }
            obs
        })
        .collect();
    Ok(PathSet {
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        dt: cfg.dt,
        tenors: spec.tenors.clone(),
        observations,
        aborted: 0,
    })
}
