use serde::{Deserialize, Serialize};

use crate::affine::{shifted_caplet_prices_fourier, AffineModelSpec, Caplet, FourierOptions};
use crate::error::{Error, Result};
use crate::termstructure::CurveSet;

use super::black::black_implied_vol_displaced;
use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::params::{set_all, FreeParameter};

/// How a quote's `value` is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuoteConvention {
    /// Black implied vol.
    #[default]
    Vol,
    /// Caplet premium per unit notional.
    Premium,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolQuote {
    pub expiry: f64,
    pub tenor: f64,
    pub strike: f64,
    pub value: f64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolQuoteSurface {
    #[serde(default)]
    pub convention: QuoteConvention,
    /// Black displacement applied to forwards and strikes alike.
    #[serde(default)]
    pub displacement: f64,
    pub entries: Vec<VolQuote>,
}

impl VolQuoteSurface {
    pub fn vols(entries: Vec<VolQuote>) -> Result<Self> {
        let s = Self { convention: QuoteConvention::Vol, displacement: 0.0, entries };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyQuotes("caplet vol surface".into()));
        }
        for (k, q) in self.entries.iter().enumerate() {
            if !(q.expiry > 0.0) || !(q.tenor > 0.0) || !q.strike.is_finite() {
                return Err(Error::InvalidInput(format!("quote {k} has a non-positive expiry or tenor")));
            }
            if !(q.value > 0.0) || !q.value.is_finite() {
                return Err(Error::InvalidInput(format!("quote {k} has non-positive value {}", q.value)));
            }
            if !(q.weight >= 0.0) {
                return Err(Error::InvalidInput(format!("quote {k} has negative weight")));
            }
            let same = |a: f64, b: f64| (a - b).abs() <= 1e-12;
            if self.entries[..k]
                .iter()
                .any(|p| same(p.expiry, q.expiry) && same(p.tenor, q.tenor) && same(p.strike, q.strike))
            {
                return Err(Error::InvalidInput(format!(
                    "duplicate quote at T={}, delta={}, K={}",
                    q.expiry, q.tenor, q.strike
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CalibrationOptions {
    pub optimizer: NelderMeadOptions,
    pub fourier: FourierOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameter {
    pub path: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub parameters: Vec<FittedParameter>,
    pub spec: AffineModelSpec,
    /// Weighted sum of squared vol residuals.
    pub objective: f64,
    /// Model minus market vol, per quote.
    pub residuals: Vec<f64>,
    pub model_vols: Vec<f64>,
    pub market_vols: Vec<f64>,
    /// Best objective after each optimiser iteration; non-increasing.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Trial points whose pricing failed (explosion, inadmissible, ...).
    pub penalized: usize,
}

/// Market forward, annuity and vol of one quote.
struct Target {
    forward: f64,
    annuity: f64,
    vol: f64,
}

fn targets(surface: &VolQuoteSurface, market: &CurveSet) -> Result<Vec<Target>> {
    let shift = surface.displacement;
    surface
        .entries
        .iter()
        .map(|q| {
            let forward = market.spread(q.tenor)?.fra_rate(&market.discount, q.expiry)?;
            let annuity = q.tenor * market.discount.discount(q.expiry + q.tenor)?;
            let vol = match surface.convention {
                QuoteConvention::Vol => q.value,
                QuoteConvention::Premium => {
                    black_implied_vol_displaced(q.value, forward, q.strike, q.expiry, annuity, shift)?
                }
            };
            Ok(Target { forward, annuity, vol })
        })
        .collect()
}

/// Model vols of the shifted model at `spec` for every quote.
fn model_vols(
    spec: &AffineModelSpec,
    surface: &VolQuoteSurface,
    targets: &[Target],
    market: &CurveSet,
    opts: &FourierOptions,
) -> Result<Vec<f64>> {
    let caplets: Vec<Caplet> =
        surface.entries.iter().map(|q| Caplet { expiry: q.expiry, tenor: q.tenor, strike: q.strike }).collect();
    let prices = shifted_caplet_prices_fourier(spec, market, &caplets, 1.0, opts)?;
    surface
        .entries
        .iter()
        .zip(targets)
        .zip(prices)
        .map(|((q, t), p)| {
            black_implied_vol_displaced(p, t.forward, q.strike, q.expiry, t.annuity, surface.displacement)
        })
        .collect()
}

/// Objective assigned to trial points that cannot be priced.
pub const PENALTY: f64 = 1e6;

/// Fits the free parameters of `template` to the surface by Nelder-Mead on
/// the sum of squared implied-vol residuals, pricing with the shifted model
/// anchored to `market`.
pub fn calibrate(
    template: &AffineModelSpec,
    free: &[FreeParameter],
    surface: &VolQuoteSurface,
    market: &CurveSet,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    surface.validate()?;
    if surface.entries.len() < free.len() {
        return Err(Error::InvalidInput(format!(
            "{} quotes cannot pin down {} free parameters",
            surface.entries.len(),
            free.len()
        )));
    }
    let targets = targets(surface, market)?;
    let start: Vec<f64> = free
        .iter()
        .map(|p| p.transform.to_unconstrained(p.initial.map_or_else(|| p.path.get(template), Ok)?))
        .collect::<Result<_>>()?;
    let build = |z: &[f64]| -> Result<AffineModelSpec> {
        let values: Vec<_> = free.iter().zip(z).map(|(p, &z)| (&p.path, p.transform.to_model(z))).collect();
        set_all(template, &values)
    };
    let score = |vols: &[f64]| {
        vols.iter().zip(&targets).zip(&surface.entries).map(|((m, t), q)| q.weight * (m - t.vol).powi(2)).sum::<f64>()
    };
    let penalized = std::sync::atomic::AtomicUsize::new(0);
    let objective = |z: &[f64]| -> f64 {
        let value =
            build(z).and_then(|spec| model_vols(&spec, surface, &targets, market, &opts.fourier)).map(|v| score(&v));
        match value {
            Ok(v) if v.is_finite() => v,
            other => {
                log::debug!("calibration trial point penalised: {:?}", other.err());
                penalized.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                PENALTY
            }
        }
    };
    let min = nelder_mead(&objective, &start, &opts.optimizer);
    if min.f >= PENALTY {
        return Err(Error::ObjectiveNaN);
    }
    if !min.converged {
        return Err(Error::MaxIterations(min.iterations));
    }
    let spec = build(&min.x)?;
    let vols = model_vols(&spec, surface, &targets, market, &opts.fourier)?;
    let residuals: Vec<f64> = vols.iter().zip(&targets).map(|(m, t)| m - t.vol).collect();
    Ok(CalibrationResult {
        parameters: free
            .iter()
            .zip(&min.x)
            .map(|(p, &z)| FittedParameter { path: p.path.to_string(), value: p.transform.to_model(z) })
            .collect(),
        spec,
        objective: score(&vols),
        residuals,
        model_vols: vols,
        market_vols: targets.iter().map(|t| t.vol).collect(),
        trace: min.trace,
        iterations: min.iterations,
        evaluations: min.evaluations,
        penalized: penalized.into_inner(),
    })
}

/// Quotes synthesised from `spec` in the requested convention.
pub fn synthesize_surface(
    spec: &AffineModelSpec,
    market: &CurveSet,
    caplets: &[Caplet],
    convention: QuoteConvention,
    opts: &FourierOptions,
) -> Result<VolQuoteSurface> {
    let prices = shifted_caplet_prices_fourier(spec, market, caplets, 1.0, opts)?;
    let mut entries = Vec::with_capacity(caplets.len());
    for (c, p) in caplets.iter().zip(prices) {
        let forward = market.spread(c.tenor)?.fra_rate(&market.discount, c.expiry)?;
        let annuity = c.tenor * market.discount.discount(c.expiry + c.tenor)?;
        let value = match convention {
            QuoteConvention::Vol => black_implied_vol_displaced(p, forward, c.strike, c.expiry, annuity, 0.0)?,
            QuoteConvention::Premium => p,
        };
        entries.push(VolQuote { expiry: c.expiry, tenor: c.tenor, strike: c.strike, value, weight: 1.0 });
    }
    let surface = VolQuoteSurface { convention, displacement: 0.0, entries };
    surface.validate()?;
    Ok(surface)
}
