use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::termstructure::CurveSet;

use super::riccati::{riccati_real, riccati_terminal, RiccatiOptions};
use super::spec::AffineModelSpec;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("time to maturity {tau} is negative")))
    }
}

/// Log bond price `phi(tau, 0, 0, 1) + <psi(tau, 0, 0, 1), x>`.
pub(crate) fn log_bond(spec: &AffineModelSpec, x: &[f64], tau: f64, opts: &RiccatiOptions) -> Result<f64> {
    check_tau(tau)?;
    let (phi, psi) = bond_exponents(spec, tau, opts)?;
    Ok(phi + dot(&psi, x))
}

/// `(phi, psi)` at `(0, 0, 1)`.
pub(crate) fn bond_exponents(spec: &AffineModelSpec, tau: f64, opts: &RiccatiOptions) -> Result<(f64, Vec<f64>)> {
    riccati_real(spec, &vec![0.0; spec.x_dim()], &vec![0.0; spec.y_dim()], 1.0, tau, opts)
}

/// `(phi, psi)` at `(0, u_i, 1)`.
pub(crate) fn spread_exponents(
    spec: &AffineModelSpec,
    tau: f64,
    i: usize,
    opts: &RiccatiOptions,
) -> Result<(f64, Vec<f64>)> {
    riccati_real(spec, &vec![0.0; spec.x_dim()], &spec.u[i], 1.0, tau, opts)
}

fn check_spread(spec: &AffineModelSpec, i: usize) -> Result<()> {
    if i < spec.u.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: spec.u.len(), got: i + 1 })
    }
}

/// OIS bond `B(t, t + tau)` at state `x`.
pub fn affine_bond(spec: &AffineModelSpec, x: &[f64], tau: f64) -> Result<f64> {
    Ok(log_bond(spec, x, tau, &RiccatiOptions::default())?.exp())
}

pub(crate) fn log_spread(
    spec: &AffineModelSpec,
    x: &[f64],
    y: &[f64],
    tau: f64,
    i: usize,
    opts: &RiccatiOptions,
) -> Result<f64> {
    check_tau(tau)?;
    check_spread(spec, i)?;
    let (p0, s0) = bond_exponents(spec, tau, opts)?;
    let (pi, si) = spread_exponents(spec, tau, i, opts)?;
    let gap: Vec<f64> = si.iter().zip(&s0).map(|(a, b)| a - b).collect();
    Ok(dot(&spec.u[i], y) + pi - p0 + dot(&gap, x))
}

/// Multiplicative spread `S^{delta_i}(t, t + tau)` at state `(x, y)`.
pub fn affine_spread(spec: &AffineModelSpec, x: &[f64], y: &[f64], tau: f64, i: usize) -> Result<f64> {
    Ok(log_spread(spec, x, y, tau, i, &RiccatiOptions::default())?.exp())
}

/// `E[exp(<v, X_T> + u.Y_T + w Z_T)]` from the spec's initial state and `Z_0 = 0`.
pub fn affine_transform(
    spec: &AffineModelSpec,
    v: &[Complex64],
    u: &[Complex64],
    w: Complex64,
    horizon: f64,
) -> Result<Complex64> {
    transform_with(spec, v, u, w, horizon, &RiccatiOptions::default())
}

pub(crate) fn transform_with(
    spec: &AffineModelSpec,
    v: &[Complex64],
    u: &[Complex64],
    w: Complex64,
    horizon: f64,
    opts: &RiccatiOptions,
) -> Result<Complex64> {
    let (phi, psi) = riccati_terminal(spec, v, u, w, horizon, opts)?;
    let lin: Complex64 = psi.iter().zip(&spec.x0).map(|(p, x)| p * x).sum();
    let uy: Complex64 = u.iter().zip(&spec.y0).map(|(u, y)| u * y).sum();
    Ok((phi + lin + uy).exp())
}

/// Shifted bond and spreads at one `(t, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedCurves {
    pub bond: f64,
    /// One entry per model tenor.
    pub spreads: Vec<f64>,
}

/// Model curves re-anchored to market curves at time 0: the model ratio
/// `model(t, T) / model(0, T)` times the market value. Market curves are
/// read through their own interpolation between pillars.
pub fn shifted_curves(
    spec: &AffineModelSpec,
    market: &CurveSet,
    x: &[f64],
    y: &[f64],
    t: f64,
    maturity: f64,
) -> Result<ShiftedCurves> {
    let opts = RiccatiOptions::default();
    let bond = shifted_bond(spec, market, x, t, maturity, &opts)?;
    let spreads =
        (0..spec.u.len()).map(|i| shifted_spread(spec, market, x, y, t, maturity, i, &opts)).collect::<Result<_>>()?;
    Ok(ShiftedCurves { bond, spreads })
}

pub(crate) fn shifted_bond(
    spec: &AffineModelSpec,
    market: &CurveSet,
    x: &[f64],
    t: f64,
    maturity: f64,
    opts: &RiccatiOptions,
) -> Result<f64> {
    check_tau(maturity - t)?;
    let disc = &market.discount;
    let anchor = disc.log_discount(maturity)? - disc.log_discount(t)?;
    let model0 = log_bond(spec, &spec.x0, t, opts)? - log_bond(spec, &spec.x0, maturity, opts)?;
    Ok((anchor + model0 + log_bond(spec, x, maturity - t, opts)?).exp())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn shifted_spread(
    spec: &AffineModelSpec,
    market: &CurveSet,
    x: &[f64],
    y: &[f64],
    t: f64,
    maturity: f64,
    i: usize,
    opts: &RiccatiOptions,
) -> Result<f64> {
    check_spread(spec, i)?;
    let anchor = market.spread(spec.tenors[i])?.log_spread(maturity)?;
    let now = log_spread(spec, x, y, maturity - t, i, opts)?;
    let initial = log_spread(spec, &spec.x0, &spec.y0, maturity, i, opts)?;
    Ok((anchor + now - initial).exp())
}
