//! Damped Fourier inversion for caplets.
//!
//! With `W = exp(Z_T + phi_d + <psi_d, X_T>)` (so `E[W | F_T] = e^{Z_T} B(T, T+delta)`)
//! and `l = u.Y_T - phi_d - <psi_d, X_T>`, a caplet pays
//! `N W (e^l - (1 + delta K))^+`. The damped call transform is
//! `E[W e^{z l}] / ((alpha + i nu)(alpha + 1 + i nu))` at `z = alpha + 1 + i nu`,
//! which is again an affine transform.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::termstructure::CurveSet;

use super::curves::{bond_exponents, log_bond, log_spread};
use super::riccati::{riccati_terminals, RiccatiOptions};
use super::spec::AffineModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FourierOptions {
    pub alpha: f64,
    /// Integration stops once the integrand modulus over a whole panel is
    /// below this (per unit notional).
    pub tail_tol: f64,
    /// Local tolerance of the adaptive Gauss-Kronrod refinement.
    pub abs_tol: f64,
    pub max_nu: f64,
    pub max_depth: usize,
    pub riccati: RiccatiOptions,
}

impl Default for FourierOptions {
    fn default() -> Self {
        Self {
            alpha: 0.75,
            tail_tol: 1e-12,
            abs_tol: 1e-13,
            max_nu: 1e8,
            max_depth: 40,
            riccati: RiccatiOptions::default(),
        }
    }
}

/// A caplet on `L_T(T, T + tenor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caplet {
    pub expiry: f64,
    pub tenor: f64,
    pub strike: f64,
}

/// One call on `l` sharing the transform of its tenor group.
struct Leg {
    expiry: usize,
    kappa: f64,
    /// `e^{-alpha kappa} / pi`.
    scale: f64,
}

/// All legs with the same tenor: one Riccati pass per `nu` serves every
/// expiry and strike.
struct Integrand<'a> {
    spec: &'a AffineModelSpec,
    expiries: Vec<f64>,
    u: &'a [f64],
    phi_d: f64,
    psi_d: Vec<f64>,
    legs: Vec<Leg>,
    opts: &'a FourierOptions,
}

impl Integrand<'_> {
    /// `E[W e^{z l}]` at every expiry.
    fn weighted(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let one_minus = Complex64::new(1.0, 0.0) - z;
        let v: Vec<Complex64> = self.psi_d.iter().map(|p| one_minus * p).collect();
        let u: Vec<Complex64> = self.u.iter().map(|&c| z * c).collect();
        let ends = riccati_terminals(self.spec, &v, &u, Complex64::new(1.0, 0.0), &self.expiries, &self.opts.riccati)?;
        let uy: Complex64 = u.iter().zip(&self.spec.y0).map(|(u, y)| u * y).sum();
        Ok(ends
            .iter()
            .map(|(phi, psi)| {
                let lin: Complex64 = psi.iter().zip(&self.spec.x0).map(|(p, x)| p * x).sum();
                (phi + lin + uy + one_minus * self.phi_d).exp()
            })
            .collect())
    }

    /// `(Re value, modulus)` of each leg's scaled integrand at `nu`.
    fn at(&self, nu: f64) -> Result<Vec<(f64, f64)>> {
        let a = self.opts.alpha;
        let z = Complex64::new(a + 1.0, nu);
        let den = Complex64::new(a, nu) * z;
        let w = self.weighted(z)?;
        Ok(self
            .legs
            .iter()
            .map(|leg| {
                let val = w[leg.expiry] / den * leg.scale;
                ((Complex64::new(0.0, -nu * leg.kappa).exp() * val).re, val.norm())
            })
            .collect())
    }
}

/// Abscissae of the 15-point Kronrod rule on `[-1, 1]`; the odd-indexed ones
/// are the 7-point Gauss-Legendre nodes.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

struct Panel {
    value: Vec<f64>,
    /// Largest per-leg error estimate.
    error: f64,
    envelope: Vec<f64>,
}

/// Kronrod estimate per leg, with the usual scaling of `|K15 - G7|` by the
/// panel's absolute variation.
fn panel(f: &Integrand, a: f64, b: f64) -> Result<Panel> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    // nodes[j] for j < 7 pairs -XK[j] and +XK[j]; nodes[7] is the centre.
    let mut nodes = Vec::with_capacity(8);
    for &x in &XK[..7] {
        nodes.push((f.at(mid - half * x)?, f.at(mid + half * x)?));
    }
    let centre = f.at(mid)?;
    let legs = f.legs.len();
    let mut out = Panel { value: vec![0.0; legs], error: 0.0, envelope: vec![0.0; legs] };
    for leg in 0..legs {
        let c = centre[leg];
        let (mut k, mut g, mut env) = (WK[7] * c.0, WG[3] * c.0, c.1);
        for (j, (l, r)) in nodes.iter().enumerate() {
            let pair = l[leg].0 + r[leg].0;
            k += WK[j] * pair;
            if j % 2 == 1 {
                g += WG[j / 2] * pair;
            }
            env = env.max(l[leg].1).max(r[leg].1);
        }
        let mean = 0.5 * k;
        let mut asc = WK[7] * (c.0 - mean).abs();
        for (j, (l, r)) in nodes.iter().enumerate() {
            asc += WK[j] * ((l[leg].0 - mean).abs() + (r[leg].0 - mean).abs());
        }
        let (raw, asc) = (((k - g) * half).abs(), asc * half);
        let err = if raw > 0.0 && asc > 0.0 { asc * (200.0 * raw / asc).powf(1.5).min(1.0) } else { raw };
        out.value[leg] = k * half;
        out.error = out.error.max(err);
        out.envelope[leg] = env;
    }
    Ok(out)
}

/// Recursive bisection until the error estimate meets `abs_tol`; returns the
/// integrals and the largest moduli seen.
fn adaptive(f: &Integrand, a: f64, b: f64, whole: Panel, depth: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if whole.error <= f.opts.abs_tol {
        return Ok((whole.value, whole.envelope));
    }
    if depth == 0 {
        return Err(Error::QuadratureNonConvergence(format!("no convergence on [{a}, {b}]")));
    }
    let m = 0.5 * (a + b);
    let (mut v, mut env) = adaptive(f, a, m, panel(f, a, m)?, depth - 1)?;
    let (rv, renv) = adaptive(f, m, b, panel(f, m, b)?, depth - 1)?;
    for j in 0..v.len() {
        v[j] += rv[j];
        env[j] = env[j].max(renv[j]);
    }
    Ok((v, env))
}

/// `E[e^{Z_T} (e^{u_i.Y_T} - factor B(T, T + delta_i))^+]` for each
/// `(T, factor)`, by damped Fourier inversion.
pub(crate) fn weighted_calls(
    spec: &AffineModelSpec,
    i: usize,
    calls: &[(f64, f64)],
    opts: &FourierOptions,
) -> Result<Vec<f64>> {
    if !(opts.alpha > 0.0) {
        return Err(Error::DampingOutOfDomain { alpha: opts.alpha });
    }
    for &(expiry, factor) in calls {
        if !(factor > 0.0) {
            return Err(Error::InvalidInput(format!("strike factor 1 + delta K = {factor} must be positive")));
        }
        if !(expiry > 0.0) || !expiry.is_finite() {
            return Err(Error::InvalidInput(format!("caplet expiry {expiry} must be positive")));
        }
    }
    if calls.is_empty() {
        return Ok(vec![]);
    }
    let mut expiries: Vec<f64> = calls.iter().map(|c| c.0).collect();
    expiries.sort_by(f64::total_cmp);
    expiries.dedup();
    let legs = calls
        .iter()
        .map(|&(expiry, factor)| {
            let kappa = factor.ln();
            Leg {
                expiry: expiries.partition_point(|&t| t < expiry),
                kappa,
                scale: (-opts.alpha * kappa).exp() / std::f64::consts::PI,
            }
        })
        .collect();
    let (phi_d, psi_d) = bond_exponents(spec, spec.tenors[i], &opts.riccati)?;
    let f = Integrand { spec, expiries, u: &spec.u[i], phi_d, psi_d, legs, opts };
    // The damped transform must be finite at its real point.
    match f.weighted(Complex64::new(opts.alpha + 1.0, 0.0)) {
        Ok(w) if w.iter().all(|v| v.re.is_finite() && v.re > 0.0) => {}
        Ok(_) | Err(Error::Explosion { .. }) => return Err(Error::DampingOutOfDomain { alpha: opts.alpha }),
        Err(e) => return Err(e),
    }
    let mut total = vec![0.0; calls.len()];
    let (mut a, mut b) = (0.0, 1.0);
    loop {
        let (v, env) = adaptive(&f, a, b, panel(&f, a, b)?, opts.max_depth)?;
        total.iter_mut().zip(&v).for_each(|(t, v)| *t += v);
        let env = env.iter().copied().fold(0.0, f64::max);
        if a > 0.0 && env < opts.tail_tol {
            break;
        }
        if b >= opts.max_nu {
            return Err(Error::QuadratureNonConvergence(format!("integrand tail still {env:e} at nu = {b}")));
        }
        (a, b) = (b, 2.0 * b);
    }
    Ok(total)
}

/// Splits `caplets` by tenor, prices each group with one shared quadrature
/// and writes results back in input order.
fn by_tenor(
    spec: &AffineModelSpec,
    caplets: &[Caplet],
    opts: &FourierOptions,
    mut call: impl FnMut(usize, &Caplet) -> Result<(f64, f64, f64)>,
) -> Result<Vec<f64>> {
    let mut prices = vec![0.0; caplets.len()];
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (j, c) in caplets.iter().enumerate() {
        let i = spec.tenor_index(c.tenor)?;
        match groups.iter_mut().find(|g| g.0 == i) {
            Some(g) => g.1.push(j),
            None => groups.push((i, vec![j])),
        }
    }
    for (i, members) in groups {
        let mut calls = Vec::with_capacity(members.len());
        let mut scales = Vec::with_capacity(members.len());
        for &j in &members {
            let (expiry, factor, scale) = call(i, &caplets[j])?;
            calls.push((expiry, factor));
            scales.push(scale);
        }
        for ((j, v), s) in members.iter().zip(weighted_calls(spec, i, &calls, opts)?).zip(scales) {
            prices[*j] = s * v;
        }
    }
    Ok(prices)
}

/// Time-0 caplets in the (unshifted) affine model, per unit notional times
/// `notional`.
pub fn caplet_prices_fourier(
    spec: &AffineModelSpec,
    caplets: &[Caplet],
    notional: f64,
    opts: &FourierOptions,
) -> Result<Vec<f64>> {
    spec.validate()?;
    by_tenor(spec, caplets, opts, |_, c| Ok((c.expiry, 1.0 + c.tenor * c.strike, notional)))
}

/// Time-0 caplet on `L_T(T, T + delta)` in the (unshifted) affine model.
pub fn caplet_price_fourier(
    spec: &AffineModelSpec,
    expiry: f64,
    tenor: f64,
    strike: f64,
    notional: f64,
    opts: &FourierOptions,
) -> Result<f64> {
    Ok(caplet_prices_fourier(spec, &[Caplet { expiry, tenor, strike }], notional, opts)?[0])
}

/// Caplets in the shifted model anchored to `market`. The shift rescales the
/// spot spread and the bond at expiry by deterministic factors and the
/// numeraire by `B^M(0,T) / B(0,T)`, so the unshifted pricer applies with a
/// modified strike factor.
pub fn shifted_caplet_prices_fourier(
    spec: &AffineModelSpec,
    market: &CurveSet,
    caplets: &[Caplet],
    notional: f64,
    opts: &FourierOptions,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let ro = &opts.riccati;
    let disc = &market.discount;
    let model_b = |t: f64| log_bond(spec, &spec.x0, t, ro);
    by_tenor(spec, caplets, opts, |i, c| {
        let (t, d) = (c.expiry, c.tenor);
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!("caplet expiry {t} must be positive")));
        }
        let log_cb = disc.log_discount(t + d)? - disc.log_discount(t)? + model_b(t)? - model_b(t + d)?;
        let log_cs = market.spread(d)?.log_spread(t)? - log_spread(spec, &spec.x0, &spec.y0, t, i, ro)?;
        let numeraire = disc.log_discount(t)? - model_b(t)?;
        Ok((t, (1.0 + d * c.strike) * (log_cb - log_cs).exp(), notional * (numeraire + log_cs).exp()))
    })
}

/// Single-caplet form of [`shifted_caplet_prices_fourier`].
pub fn shifted_caplet_price_fourier(
    spec: &AffineModelSpec,
    market: &CurveSet,
    expiry: f64,
    tenor: f64,
    strike: f64,
    notional: f64,
    opts: &FourierOptions,
) -> Result<f64> {
    Ok(shifted_caplet_prices_fourier(spec, market, &[Caplet { expiry, tenor, strike }], notional, opts)?[0])
}
