use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{find_root, RootOptions};
use crate::products::{basis_swap_spread, irs_swap_rate};

use super::{
    spread_from_rates, DiscountCurve, MarketQuoteSet, OisQuote, Schedule, SpreadCurve, SpreadQuote, SpreadQuoteKind,
    Tenor, DATE_EPS,
};

const BOOTSTRAP_ROOT: RootOptions = RootOptions { f_tol: 1e-14, x_tol: 1e-16, max_iter: 200 };

/// Bootstrap the OIS discount curve, one pillar per quote.
pub fn bootstrap_ois(quotes: &MarketQuoteSet) -> Result<DiscountCurve> {
    quotes.validate()?;
    let ois = &quotes.ois;
    let Some(first) = ois.first() else {
        return Err(Error::EmptyQuotes("OIS".into()));
    };
    let tenor = first.tenor.years();
    for w in ois.windows(2) {
        if w[1].maturity <= w[0].maturity {
            return Err(Error::NonIncreasingMaturities { previous: w[0].maturity, next: w[1].maturity });
        }
    }
    if let Some(q) = ois.iter().find(|q| (q.tenor.years() - tenor).abs() > DATE_EPS) {
        return Err(Error::InvalidInput(format!(
            "OIS quotes must share one payment tenor ({} vs {})",
            tenor,
            q.tenor.years()
        )));
    }

    let mut pillars: Vec<(f64, f64)> = Vec::with_capacity(ois.len());
    for q in ois {
        let schedule = q.schedule()?;
        let (t_prev, lnb_prev) = pillars.last().map_or((0.0, 0.0), |&(t, l)| (t, l));
        let guess = lnb_prev - q.rate * (q.maturity - t_prev);
        let residual = |lnb: f64| -> Result<f64> {
            let mut trial: Vec<(f64, f64)> = pillars.iter().map(|&(t, l)| (t, l.exp())).collect();
            trial.push((q.maturity, lnb.exp()));
            Ok(DiscountCurve::from_pillars(&trial)?.ois_swap_rate(&schedule)? - q.rate)
        };
        let width = 0.01 * (q.maturity - t_prev).max(0.01);
        let lnb = find_root(residual, guess - width, guess + width, BOOTSTRAP_ROOT, q.maturity)?;
        if !lnb.exp().is_finite() || lnb.exp() <= 0.0 {
            return Err(Error::NoSolution { pillar: q.maturity, reason: "discount left (0, inf)".into() });
        }
        pillars.push((q.maturity, lnb));
    }
    let out: Vec<(f64, f64)> = pillars.iter().map(|&(t, l)| (t, l.exp())).collect();
    DiscountCurve::from_pillars(&out)
}

/// Diagnostic raised while bootstrapping a spread curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SpreadWarning {
    /// A pillar spread below one (allowed, but outside the ordered regime).
    NegativeSpread { tenor: f64, maturity: f64, spread: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadBootstrap {
    pub curve: SpreadCurve,
    pub warnings: Vec<SpreadWarning>,
}

/// Floating-leg schedule of a spot-starting swap of tenor `delta` ending at `end`.
fn leg(delta: f64, end: f64) -> Result<Schedule> {
    Schedule::spanning(0.0, end, delta)
}

/// Bootstrap one tenor's spread curve. `references` must contain the curves
/// that basis-swap quotes refer to.
pub fn bootstrap_spread_curve(
    disc: &DiscountCurve,
    quotes: &[SpreadQuote],
    references: &[SpreadCurve],
) -> Result<SpreadBootstrap> {
    let Some(first) = quotes.first() else {
        return Err(Error::EmptyQuotes("spread curve".into()));
    };
    let tenor = first.tenor;
    let delta = tenor.years();
    if quotes.iter().any(|q| (q.tenor.years() - delta).abs() > DATE_EPS) {
        return Err(Error::InvalidInput("spread quotes mix tenors".into()));
    }
    let mut sorted: Vec<SpreadQuote> = quotes.to_vec();
    sorted.sort_by(|a, b| a.pillar().total_cmp(&b.pillar()));
    for w in sorted.windows(2) {
        if w[1].pillar() - w[0].pillar() <= DATE_EPS {
            return Err(Error::NonIncreasingMaturities { previous: w[0].pillar(), next: w[1].pillar() });
        }
    }

    let mut pillars: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    let mut warnings = Vec::new();
    for q in &sorted {
        let pillar = q.pillar().max(0.0);
        let log_s = match q.kind {
            SpreadQuoteKind::Fra => spread_from_rates(q.quote, disc.simple_forward(q.maturity, delta)?, delta).ln(),
            SpreadQuoteKind::Irs => {
                let schedule = leg(delta, q.maturity)?;
                solve_pillar(&pillars, tenor, pillar, |c| Ok(irs_swap_rate(disc, c, &schedule)? - q.quote))?
            }
            SpreadQuoteKind::Basis { reference } => {
                let other =
                    references.iter().find(|c| (c.tenor().years() - reference.years()).abs() < DATE_EPS).ok_or_else(
                        || Error::InvalidInput(format!("no reference curve for tenor {}", reference.years())),
                    )?;
                let own = leg(delta, q.maturity)?;
                let theirs = leg(reference.years(), q.maturity)?;
                let longer_first = delta > reference.years();
                let fixed = if longer_first { theirs } else { own };
                solve_pillar(&pillars, tenor, pillar, |c| {
                    let k = if longer_first {
                        basis_swap_spread(disc, c, other, &own, &theirs, &fixed)?
                    } else {
                        basis_swap_spread(disc, other, c, &theirs, &own, &fixed)?
                    };
                    Ok(k - q.quote)
                })?
            }
        };
        if !log_s.is_finite() {
            return Err(Error::NoSolution { pillar, reason: "non-finite spread".into() });
        }
        if log_s < 0.0 {
            log::warn!("spread below one for tenor {delta} at {pillar}: {}", log_s.exp());
            warnings.push(SpreadWarning::NegativeSpread { tenor: delta, maturity: pillar, spread: log_s.exp() });
        }
        pillars.push((pillar, log_s));
    }
    let out: Vec<(f64, f64)> = pillars.iter().map(|&(t, l)| (t, l.exp())).collect();
    Ok(SpreadBootstrap { curve: SpreadCurve::from_pillars(tenor, &out)?, warnings })
}

fn solve_pillar(
    pillars: &[(f64, f64)],
    tenor: Tenor,
    pillar: f64,
    mut residual: impl FnMut(&SpreadCurve) -> Result<f64>,
) -> Result<f64> {
    let guess = pillars.last().map_or(0.0, |p| p.1);
    let f = |x: f64| -> Result<f64> {
        let mut trial: Vec<(f64, f64)> = pillars.iter().map(|&(t, l)| (t, l.exp())).collect();
        trial.push((pillar, x.exp()));
        residual(&SpreadCurve::from_pillars(tenor, &trial)?)
    };
    find_root(f, guess - 0.005, guess + 0.005, BOOTSTRAP_ROOT, pillar)
}

/// Discount curve plus one spread curve per tenor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub discount: DiscountCurve,
    pub spreads: Vec<SpreadCurve>,
}

impl CurveSet {
    pub fn spread(&self, tenor: f64) -> Result<&SpreadCurve> {
        self.spreads
            .iter()
            .find(|c| (c.tenor().years() - tenor).abs() < DATE_EPS)
            .ok_or_else(|| Error::InvalidInput(format!("no spread curve for tenor {tenor}")))
    }

    /// Par OIS rate implied by the discount curve for `quote`'s swap.
    pub fn reprice_ois(&self, quote: &OisQuote) -> Result<f64> {
        self.discount.ois_swap_rate(&quote.schedule()?)
    }

    /// Model value of the quoted quantity (FRA rate, swap rate or basis
    /// spread) under these curves.
    pub fn reprice_spread(&self, quote: &SpreadQuote) -> Result<f64> {
        let disc = &self.discount;
        let delta = quote.tenor.years();
        let own = self.spread(delta)?;
        match quote.kind {
            SpreadQuoteKind::Fra => own.fra_rate(disc, quote.maturity),
            SpreadQuoteKind::Irs => irs_swap_rate(disc, own, &leg(delta, quote.maturity)?),
            SpreadQuoteKind::Basis { reference } => {
                let other = self.spread(reference.years())?;
                let mine = leg(delta, quote.maturity)?;
                let theirs = leg(reference.years(), quote.maturity)?;
                if delta > reference.years() {
                    basis_swap_spread(disc, own, other, &mine, &theirs, &theirs)
                } else {
                    basis_swap_spread(disc, other, own, &theirs, &mine, &mine)
                }
            }
        }
    }
}

/// Bootstrap the discount curve and every spread curve in `quotes`. Tenors
/// quoted only through basis swaps are built after the tenors they reference.
pub fn bootstrap_curve_set(quotes: &MarketQuoteSet) -> Result<(CurveSet, Vec<SpreadWarning>)> {
    let discount = bootstrap_ois(quotes)?;
    let mut pending = quotes.tenors();
    let mut spreads: Vec<SpreadCurve> = Vec::new();
    let mut warnings = Vec::new();
    while !pending.is_empty() {
        let ready = pending.iter().position(|&t| {
            quotes.quotes_for(t).iter().all(|q| match q.kind {
                SpreadQuoteKind::Basis { reference } => {
                    spreads.iter().any(|c| (c.tenor().years() - reference.years()).abs() < DATE_EPS)
                }
                _ => true,
            })
        });
        let Some(idx) = ready else {
            return Err(Error::InvalidInput("circular basis-swap references between tenors".into()));
        };
        let tenor = pending.remove(idx);
        let built = bootstrap_spread_curve(&discount, &quotes.quotes_for(tenor), &spreads)?;
        warnings.extend(built.warnings);
        spreads.push(built.curve);
    }
    spreads.sort_by(|a, b| a.tenor().years().total_cmp(&b.tenor().years()));
    Ok((CurveSet { discount, spreads }, warnings))
}
