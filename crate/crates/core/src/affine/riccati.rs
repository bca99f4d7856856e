use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::spec::AffineModelSpec;

/// Norm beyond which a Riccati solution counts as exploded.
pub const EXPLOSION_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiOptions {
    /// At least this many RK4 steps over `[0, T]`.
    pub min_steps: usize,
    /// Bound on the Richardson error estimate, relative to `max(1, |value|)`.
    pub tolerance: f64,
    /// Refinement stops once the step count exceeds this.
    pub max_steps: usize,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self { min_steps: 1000, tolerance: 1e-10, max_steps: 1 << 20 }
    }
}

/// `phi` and `psi` on the time grid `times`, for argument `(v, u, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    pub phi: Vec<Complex64>,
    pub psi: Vec<Vec<Complex64>>,
    pub v: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub w: Complex64,
    /// Richardson estimate of the terminal error.
    pub error_estimate: f64,
}

impl RiccatiSolution {
    pub fn terminal(&self) -> (Complex64, &[Complex64]) {
        (*self.phi.last().unwrap(), self.psi.last().unwrap())
    }
}

/// `F` and `R` of the spec with `(u, w)` frozen; they depend on `psi` only.
/// Matrices are flattened row-major.
pub(crate) struct VectorField {
    d: usize,
    f_const: Complex64,
    f_lin: Vec<Complex64>,
    a: Vec<f64>,
    r_const: Vec<Complex64>,
    /// `beta_t[k * d + i] = beta[i][k]`.
    beta_t: Vec<f64>,
    /// `(k, alpha_k)` for the nonzero diffusion loadings.
    alpha: Vec<(usize, Vec<f64>)>,
    /// `(size, intensity, loadings)` per jump.
    jumps: Vec<(Vec<f64>, f64, Vec<f64>)>,
    jump_terms: Vec<Complex64>,
}

fn quad(m: &[f64], psi: &[Complex64]) -> Complex64 {
    let d = psi.len();
    let mut s = Complex64::default();
    for (i, p) in psi.iter().enumerate() {
        let row = &m[i * d..(i + 1) * d];
        let mut inner = Complex64::default();
        for (q, v) in psi.iter().zip(row) {
            inner += q * v;
        }
        s += p * inner;
    }
    0.5 * s
}

impl VectorField {
    pub(crate) fn new(spec: &AffineModelSpec, u: &[Complex64], w: Complex64) -> Self {
        let d = spec.x_dim();
        let (drift, loading) = spec.y.drift();
        let mut f_const: Complex64 = drift.iter().zip(u).map(|(c, u)| u * c).sum::<Complex64>() - w * spec.rate.l;
        let mut f_lin: Vec<Complex64> = spec.x.b.iter().map(|&b| Complex64::new(b, 0.0)).collect();
        if let Some((cov, cross)) = spec.y.noise() {
            for (i, row) in cov.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    f_const += 0.5 * u[i] * u[j] * c;
                }
            }
            for (fl, row) in f_lin.iter_mut().zip(cross) {
                *fl += row.iter().zip(u).map(|(c, u)| u * c).sum::<Complex64>();
            }
        }
        let r_const = (0..d)
            .map(|k| loading.iter().zip(u).map(|(row, u)| u * row[k]).sum::<Complex64>() - w * spec.rate.lambda[k])
            .collect();
        let flat = |m: &[Vec<f64>]| m.iter().flatten().copied().collect::<Vec<f64>>();
        let alpha = (0..spec.state.pos_dims)
            .filter_map(|k| spec.alpha(k).map(|m| (k, flat(m))))
            .filter(|(_, m)| m.iter().any(|&v| v != 0.0))
            .collect();
        Self {
            d,
            f_const,
            f_lin,
            a: flat(&spec.x.a),
            r_const,
            beta_t: (0..d * d).map(|idx| spec.x.beta[idx % d][idx / d]).collect(),
            alpha,
            jumps: spec
                .x
                .jumps
                .iter()
                .map(|j| (j.size.clone(), j.intensity, (0..d).map(|k| j.loading(k)).collect()))
                .collect(),
            jump_terms: vec![Complex64::default(); spec.x.jumps.len()],
        }
    }

    /// `(d phi / dt, d psi / dt)` at `psi`.
    pub(crate) fn eval(&mut self, psi: &[Complex64], dpsi: &mut [Complex64]) -> Complex64 {
        let d = self.d;
        for (e, (size, _, _)) in self.jump_terms.iter_mut().zip(&self.jumps) {
            *e = psi.iter().zip(size).map(|(p, s)| p * s).sum::<Complex64>().exp() - 1.0;
        }
        let mut dphi = self.f_const + quad(&self.a, psi);
        for (a, b) in self.f_lin.iter().zip(psi) {
            dphi += a * b;
        }
        for (e, (_, intensity, _)) in self.jump_terms.iter().zip(&self.jumps) {
            dphi += e * intensity;
        }
        for (k, dk) in dpsi.iter_mut().enumerate() {
            let mut v = self.r_const[k];
            for (p, b) in psi.iter().zip(&self.beta_t[k * d..(k + 1) * d]) {
                v += p * b;
            }
            for (e, (_, _, loadings)) in self.jump_terms.iter().zip(&self.jumps) {
                v += e * loadings[k];
            }
            *dk = v;
        }
        for (k, alpha) in &self.alpha {
            dpsi[*k] += quad(alpha, psi);
        }
        dphi
    }
}

struct Rk4Scratch {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4Scratch {
    fn new(d: usize) -> Self {
        let z = vec![Complex64::default(); d];
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z }
    }
}

fn rk4_step(field: &mut VectorField, h: f64, phi: &mut Complex64, psi: &mut [Complex64], s: &mut Rk4Scratch) {
    let Rk4Scratch { k, tmp } = s;
    let [k1, k2, k3, k4] = k;
    let p1 = field.eval(psi, k1);
    for ((t, p), d) in tmp.iter_mut().zip(psi.iter()).zip(k1.iter()) {
        *t = p + d * (0.5 * h);
    }
    let p2 = field.eval(tmp, k2);
    for ((t, p), d) in tmp.iter_mut().zip(psi.iter()).zip(k2.iter()) {
        *t = p + d * (0.5 * h);
    }
    let p3 = field.eval(tmp, k3);
    for ((t, p), d) in tmp.iter_mut().zip(psi.iter()).zip(k3.iter()) {
        *t = p + d * h;
    }
    let p4 = field.eval(tmp, k4);
    *phi += (p1 + 2.0 * p2 + 2.0 * p3 + p4) * (h / 6.0);
    for (i, p) in psi.iter_mut().enumerate() {
        *p += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
    }
}

fn exploded(phi: Complex64, psi: &[Complex64]) -> bool {
    let big = |z: &Complex64| !(z.norm_sqr() <= EXPLOSION_THRESHOLD * EXPLOSION_THRESHOLD);
    big(&phi) || psi.iter().any(big)
}

/// Integrates `n` steps; `on_step` sees every intermediate state.
fn integrate(
    field: &mut VectorField,
    v: &[Complex64],
    horizon: f64,
    n: usize,
    mut on_step: impl FnMut(Complex64, &[Complex64]),
) -> Result<(Complex64, Vec<Complex64>)> {
    let h = horizon / n as f64;
    let mut phi = Complex64::default();
    let mut psi = v.to_vec();
    let mut scratch = Rk4Scratch::new(v.len());
    for step in 0..n {
        rk4_step(field, h, &mut phi, &mut psi, &mut scratch);
        if exploded(phi, &psi) {
            return Err(Error::Explosion { time: (step + 1) as f64 * h });
        }
        on_step(phi, &psi);
    }
    Ok((phi, psi))
}

fn gap(a: &(Complex64, Vec<Complex64>), b: &(Complex64, Vec<Complex64>)) -> f64 {
    let rel = |x: Complex64, y: Complex64| (x - y).norm() / x.norm().max(1.0);
    a.1.iter().zip(&b.1).map(|(x, y)| rel(*x, *y)).fold(rel(a.0, b.0), f64::max)
}

fn check_argument(spec: &AffineModelSpec, v: &[Complex64], u: &[Complex64], horizon: f64) -> Result<()> {
    if v.len() != spec.x_dim() {
        return Err(Error::DimensionMismatch { expected: spec.x_dim(), got: v.len() });
    }
    if u.len() != spec.y_dim() {
        return Err(Error::DimensionMismatch { expected: spec.y_dim(), got: u.len() });
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("Riccati horizon {horizon} must be nonnegative")));
    }
    Ok(())
}

/// Runs fine and half-resolution solves, refining until the Richardson
/// estimate meets the tolerance. Returns the step count and the estimate.
fn refine<T>(
    spec: &AffineModelSpec,
    v: &[Complex64],
    u: &[Complex64],
    w: Complex64,
    horizon: f64,
    opts: &RiccatiOptions,
    mut fine: impl FnMut(&mut VectorField, usize) -> Result<(T, (Complex64, Vec<Complex64>))>,
) -> Result<(T, f64)> {
    let mut field = VectorField::new(spec, u, w);
    let mut n = opts.min_steps.max(2).div_ceil(2) * 2;
    loop {
        let (out, end) = fine(&mut field, n)?;
        let coarse = integrate(&mut field, v, horizon, n / 2, |_, _| {})?;
        let estimate = gap(&end, &coarse) / 15.0;
        if estimate <= opts.tolerance {
            return Ok((out, estimate));
        }
        if n * 2 > opts.max_steps {
            return Err(Error::RiccatiAccuracy { tolerance: opts.tolerance, estimate });
        }
        n *= 2;
    }
}

/// Solves `d phi/dt = F(psi, u, w)`, `d psi/dt = R(psi, u, w)` with
/// `phi(0) = 0`, `psi(0) = v` on `[0, horizon]`.
pub fn solve_riccati(
    spec: &AffineModelSpec,
    v: &[Complex64],
    u: &[Complex64],
    w: Complex64,
    horizon: f64,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution> {
    check_argument(spec, v, u, horizon)?;
    let mut sol = RiccatiSolution {
        times: vec![0.0],
        phi: vec![Complex64::default()],
        psi: vec![v.to_vec()],
        v: v.to_vec(),
        u: u.to_vec(),
        w,
        error_estimate: 0.0,
    };
    if horizon == 0.0 {
        return Ok(sol);
    }
    let ((phi, psi), estimate) = refine(spec, v, u, w, horizon, opts, |field, n| {
        let mut phi = Vec::with_capacity(n + 1);
        let mut psi = Vec::with_capacity(n + 1);
        phi.push(Complex64::default());
        psi.push(v.to_vec());
        let end = integrate(field, v, horizon, n, |a, b| {
            phi.push(a);
            psi.push(b.to_vec());
        })?;
        Ok(((phi, psi), end))
    })?;
    let n = phi.len() - 1;
    sol.times = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
    sol.phi = phi;
    sol.psi = psi;
    sol.error_estimate = estimate;
    Ok(sol)
}

/// Terminal `(phi, psi)` only, without storing the path.
pub(crate) fn riccati_terminal(
    spec: &AffineModelSpec,
    v: &[Complex64],
    u: &[Complex64],
    w: Complex64,
    horizon: f64,
    opts: &RiccatiOptions,
) -> Result<(Complex64, Vec<Complex64>)> {
    check_argument(spec, v, u, horizon)?;
    if horizon == 0.0 {
        return Ok((Complex64::default(), v.to_vec()));
    }
    Ok(riccati_terminals(spec, v, u, w, &[horizon], opts)?.pop().unwrap())
}

/// Runs `counts[k]` steps across each segment `[horizons[k-1], horizons[k]]`,
/// recording the state at every horizon.
fn integrate_segments(
    field: &mut VectorField,
    v: &[Complex64],
    horizons: &[f64],
    counts: &[usize],
) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    let mut phi = Complex64::default();
    let mut psi = v.to_vec();
    let mut scratch = Rk4Scratch::new(v.len());
    let mut out = Vec::with_capacity(horizons.len());
    let mut start = 0.0;
    for (&end, &n) in horizons.iter().zip(counts) {
        let h = (end - start) / n.max(1) as f64;
        for step in 0..n {
            rk4_step(field, h, &mut phi, &mut psi, &mut scratch);
            if exploded(phi, &psi) {
                return Err(Error::Explosion { time: start + (step + 1) as f64 * h });
            }
        }
        out.push((phi, psi.clone()));
        start = end;
    }
    Ok(out)
}

/// Terminal states at several ascending, positive horizons from one pass.
/// The segment ending at `T_k` uses steps no longer than `T_k / min_steps`,
/// so every horizon meets the same step bound as a standalone solve.
pub(crate) fn riccati_terminals(
    spec: &AffineModelSpec,
    v: &[Complex64],
    u: &[Complex64],
    w: Complex64,
    horizons: &[f64],
    opts: &RiccatiOptions,
) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    for &t in horizons {
        check_argument(spec, v, u, t)?;
    }
    if horizons.first().is_some_and(|&t| t <= 0.0) || horizons.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidInput("horizons must be positive and ascending".into()));
    }
    let mut field = VectorField::new(spec, u, w);
    let mut start = 0.0;
    let mut counts: Vec<usize> = horizons
        .iter()
        .map(|&t| {
            let len = t - start;
            start = t;
            if len == 0.0 {
                0
            } else {
                ((opts.min_steps as f64 * len / t).ceil() as usize).max(2).div_ceil(2) * 2
            }
        })
        .collect();
    loop {
        let fine = integrate_segments(&mut field, v, horizons, &counts)?;
        let half: Vec<usize> = counts.iter().map(|n| n / 2).collect();
        let coarse = integrate_segments(&mut field, v, horizons, &half)?;
        let estimate = fine.iter().zip(&coarse).map(|(f, c)| gap(f, c)).fold(0.0, f64::max) / 15.0;
        if estimate <= opts.tolerance {
            return Ok(fine);
        }
        if counts.iter().sum::<usize>() * 2 > opts.max_steps {
            return Err(Error::RiccatiAccuracy { tolerance: opts.tolerance, estimate });
        }
        counts.iter_mut().for_each(|n| *n *= 2);
    }
}

/// Real-argument terminal solve, with a check that the result stayed real.
pub(crate) fn riccati_real(
    spec: &AffineModelSpec,
    v: &[f64],
    u: &[f64],
    w: f64,
    horizon: f64,
    opts: &RiccatiOptions,
) -> Result<(f64, Vec<f64>)> {
    let c = |x: &[f64]| x.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>();
    let (phi, psi) = riccati_terminal(spec, &c(v), &c(u), Complex64::new(w, 0.0), horizon, opts)?;
    Ok((phi.re, psi.iter().map(|z| z.re).collect()))
}
