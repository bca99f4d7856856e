//! Linear products priced off curves, and caplets/swaptions priced on
//! simulated paths. All values are time-0 values under perfect OIS
//! collateralisation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathset::{McEstimate, PathSet, TIME_EPS};
use crate::termstructure::{CurveSet, DiscountCurve, Schedule, SpreadCurve, Tenor};

fn check_tenor(spread: &SpreadCurve, schedule: &Schedule) -> Result<()> {
    if (spread.tenor().years() - schedule.tenor).abs() > TIME_EPS {
        return Err(Error::InvalidSchedule(format!(
            "schedule spacing {} does not match spread tenor {}",
            schedule.tenor,
            spread.tenor().years()
        )));
    }
    Ok(())
}

/// `sum_i (B(T_{i-1}) S(T_{i-1}) - B(T_i))`: value of the floating leg per
/// unit notional.
fn floating_leg(disc: &DiscountCurve, spread: &SpreadCurve, schedule: &Schedule) -> Result<f64> {
    check_tenor(spread, schedule)?;
    let mut sum = 0.0;
    for i in 1..=schedule.periods {
        let t0 = schedule.date(i - 1);
        sum += disc.discount(t0)? * spread.spread(t0)? - disc.discount(schedule.date(i))?;
    }
    Ok(sum)
}

/// `delta * sum_{i>=1} B(T_i)`.
pub fn annuity(disc: &DiscountCurve, schedule: &Schedule) -> Result<f64> {
    let mut sum = 0.0;
    for i in 1..=schedule.periods {
        sum += disc.discount(schedule.date(i))?;
    }
    Ok(schedule.tenor * sum)
}

/// FRA on `[t, t + delta]` (delta is the spread curve's tenor).
pub fn fra_value(disc: &DiscountCurve, spread: &SpreadCurve, t: f64, fixed: f64, notional: f64) -> Result<f64> {
    let d = spread.tenor().years();
    Ok(notional * (disc.discount(t)? * spread.spread(t)? - disc.discount(t + d)? * (1.0 + d * fixed)))
}

pub fn ois_swap_rate(disc: &DiscountCurve, schedule: &Schedule) -> Result<f64> {
    disc.ois_swap_rate(schedule)
}

pub fn ois_swap_value(disc: &DiscountCurve, schedule: &Schedule, fixed: f64, notional: f64) -> Result<f64> {
    Ok(notional * (disc.discount(schedule.start)? - disc.discount(schedule.end())? - fixed * annuity(disc, schedule)?))
}

pub fn irs_value(
    disc: &DiscountCurve,
    spread: &SpreadCurve,
    schedule: &Schedule,
    fixed: f64,
    notional: f64,
) -> Result<f64> {
    Ok(notional * (floating_leg(disc, spread, schedule)? - fixed * annuity(disc, schedule)?))
}

pub fn irs_swap_rate(disc: &DiscountCurve, spread: &SpreadCurve, schedule: &Schedule) -> Result<f64> {
    Ok(floating_leg(disc, spread, schedule)? / annuity(disc, schedule)?)
}

/// One schedule's dates must all appear in the other's.
fn nested(a: &Schedule, b: &Schedule) -> bool {
    let (coarse, fine) = if a.tenor >= b.tenor { (a, b) } else { (b, a) };
    let ratio = coarse.tenor / fine.tenor;
    (ratio - ratio.round()).abs() < 1e-9
}

/// Basis swap spread: difference of the two floating legs over the fixed
/// leg's annuity. Both floating legs and the fixed leg must share start and
/// end dates, and one floating schedule must refine the other.
pub fn basis_swap_spread(
    disc: &DiscountCurve,
    spread1: &SpreadCurve,
    spread2: &SpreadCurve,
    leg1: &Schedule,
    leg2: &Schedule,
    fixed: &Schedule,
) -> Result<f64> {
    let same = |a: f64, b: f64| (a - b).abs() <= TIME_EPS;
    if !(same(leg1.start, leg2.start) && same(leg1.start, fixed.start))
        || !(same(leg1.end(), leg2.end()) && same(leg1.end(), fixed.end()))
        || !nested(leg1, leg2)
    {
        return Err(Error::InvalidSchedule("basis swap legs must share endpoints and nest".into()));
    }
    let numerator = floating_leg(disc, spread1, leg1)? - floating_leg(disc, spread2, leg2)?;
    Ok(numerator / annuity(disc, fixed)?)
}

/// Caplet on `L_T(T, T + delta)` struck at `strike`, estimated on paths:
/// `N * E[(S(T,T) - (1 + delta K) B(T, T + delta))^+ / B_T]`.
pub fn caplet_price_mc(paths: &PathSet, expiry: f64, tenor: f64, strike: f64, notional: f64) -> Result<McEstimate> {
    let obs = paths.observation(expiry)?;
    let k = paths.tenor_index(tenor)?;
    let j0 = obs.maturity_index(expiry)?;
    let j1 = obs.maturity_index(expiry + tenor)?;
    let factor = 1.0 + tenor * strike;
    let est = McEstimate::from_samples(
        (0..obs.n_paths()).map(|p| (obs.spread(k, p, j0) - factor * obs.discount(p, j1)).max(0.0) / obs.numeraire[p]),
    )?;
    Ok(est.scaled(notional))
}

/// Payer swaption expiring at `schedule.start` on the swap over `schedule`
/// (spacing = Libor tenor).
pub fn swaption_price_mc(paths: &PathSet, schedule: &Schedule, strike: f64, notional: f64) -> Result<McEstimate> {
    let obs = paths.observation(schedule.start)?;
    let k = paths.tenor_index(schedule.tenor)?;
    let idx: Vec<usize> = schedule.dates().iter().map(|&t| obs.maturity_index(t)).collect::<Result<_>>()?;
    let factor = 1.0 + schedule.tenor * strike;
    let est = McEstimate::from_samples((0..obs.n_paths()).map(|p| {
        let mut v = 0.0;
        for i in 1..idx.len() {
            v += obs.discount(p, idx[i - 1]) * obs.spread(k, p, idx[i - 1]) - factor * obs.discount(p, idx[i]);
        }
        v.max(0.0) / obs.numeraire[p]
    }))?;
    Ok(est.scaled(notional))
}

/// Product description as exchanged with the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProductSpec {
    Fra { start: f64, tenor: Tenor, fixed_rate: f64, notional: f64 },
    OisSwap { schedule: Vec<f64>, fixed_rate: f64, notional: f64 },
    Irs { schedule: Vec<f64>, fixed_rate: f64, notional: f64 },
    BasisSwap { schedule1: Vec<f64>, schedule2: Vec<f64>, fixed_schedule: Vec<f64>, notional: f64 },
    Caplet { expiry: f64, tenor: Tenor, strike: f64, notional: f64 },
    Swaption { schedule: Vec<f64>, strike: f64, notional: f64 },
}

/// Uniform schedule from an explicit list of dates.
pub fn schedule_from_dates(dates: &[f64]) -> Result<Schedule> {
    if dates.len() < 2 {
        return Err(Error::InvalidSchedule("need at least two dates".into()));
    }
    let tenor = dates[1] - dates[0];
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidSchedule("dates must be strictly increasing".into()));
        }
        if ((w[1] - w[0]) - tenor).abs() > 1e-9 {
            return Err(Error::InvalidSchedule("dates must be uniformly spaced".into()));
        }
    }
    Schedule::new(dates[0], tenor, dates.len() - 1)
}

impl ProductSpec {
    pub fn notional(&self) -> f64 {
        match *self {
            Self::Fra { notional, .. }
            | Self::OisSwap { notional, .. }
            | Self::Irs { notional, .. }
            | Self::BasisSwap { notional, .. }
            | Self::Caplet { notional, .. }
            | Self::Swaption { notional, .. } => notional,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.notional() > 0.0) {
            return Err(Error::InvalidInput("notional must be positive".into()));
        }
        match self {
            Self::OisSwap { schedule, .. } | Self::Irs { schedule, .. } | Self::Swaption { schedule, .. } => {
                schedule_from_dates(schedule).map(|_| ())
            }
            Self::BasisSwap { schedule1, schedule2, fixed_schedule, .. } => {
                schedule_from_dates(schedule1)?;
                schedule_from_dates(schedule2)?;
                schedule_from_dates(fixed_schedule).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn is_optional(&self) -> bool {
        matches!(self, Self::Caplet { .. } | Self::Swaption { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegValue {
    pub leg: String,
    pub value: f64,
}

/// Price with optional Monte Carlo error and a per-leg breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingReport {
    pub price: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// Par rate of the product (FRA/swap rate or basis spread), if linear.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub par_rate: Option<f64>,
    pub legs: Vec<LegValue>,
}

fn leg(name: &str, value: f64) -> LegValue {
    LegValue { leg: name.into(), value }
}

/// Closed-form price of a linear product.
pub fn price_linear(spec: &ProductSpec, curves: &CurveSet) -> Result<PricingReport> {
    spec.validate()?;
    let disc = &curves.discount;
    match spec {
        ProductSpec::Fra { start, tenor, fixed_rate, notional } => {
            let s = curves.spread(tenor.years())?;
            let d = tenor.years();
            let end = disc.discount(start + d)?;
            let float = notional * (disc.discount(*start)? * s.spread(*start)? - end);
            let fixed = -notional * end * d * fixed_rate;
            Ok(PricingReport {
                price: fra_value(disc, s, *start, *fixed_rate, *notional)?,
                std_error: None,
                par_rate: Some(s.fra_rate(disc, *start)?),
                legs: vec![leg("floating", float), leg("fixed", fixed)],
            })
        }
        ProductSpec::OisSwap { schedule, fixed_rate, notional } => {
            let sch = schedule_from_dates(schedule)?;
            let float = notional * (disc.discount(sch.start)? - disc.discount(sch.end())?);
            let fixed = -notional * fixed_rate * annuity(disc, &sch)?;
            Ok(PricingReport {
                price: ois_swap_value(disc, &sch, *fixed_rate, *notional)?,
                std_error: None,
                par_rate: Some(ois_swap_rate(disc, &sch)?),
                legs: vec![leg("floating", float), leg("fixed", fixed)],
            })
        }
        ProductSpec::Irs { schedule, fixed_rate, notional } => {
            let sch = schedule_from_dates(schedule)?;
            let s = curves.spread(sch.tenor)?;
            let float = notional * floating_leg(disc, s, &sch)?;
            let fixed = -notional * fixed_rate * annuity(disc, &sch)?;
            Ok(PricingReport {
                price: irs_value(disc, s, &sch, *fixed_rate, *notional)?,
                std_error: None,
                par_rate: Some(irs_swap_rate(disc, s, &sch)?),
                legs: vec![leg("floating", float), leg("fixed", fixed)],
            })
        }
        ProductSpec::BasisSwap { schedule1, schedule2, fixed_schedule, notional } => {
            let (s1, s2, s3) = (
                schedule_from_dates(schedule1)?,
                schedule_from_dates(schedule2)?,
                schedule_from_dates(fixed_schedule)?,
            );
            let (c1, c2) = (curves.spread(s1.tenor)?, curves.spread(s2.tenor)?);
            let k = basis_swap_spread(disc, c1, c2, &s1, &s2, &s3)?;
            let l1 = notional * floating_leg(disc, c1, &s1)?;
            let l2 = -notional * floating_leg(disc, c2, &s2)?;
            Ok(PricingReport {
                price: l1 + l2,
                std_error: None,
                par_rate: Some(k),
                legs: vec![leg("floating1", l1), leg("floating2", l2)],
            })
        }
        ProductSpec::Caplet { .. } | ProductSpec::Swaption { .. } => {
            Err(Error::InvalidInput("caplets and swaptions need a model".into()))
        }
    }
}

/// Monte Carlo price of a caplet or swaption.
pub fn price_on_paths(spec: &ProductSpec, paths: &PathSet) -> Result<PricingReport> {
    spec.validate()?;
    let est = match spec {
        ProductSpec::Caplet { expiry, tenor, strike, notional } => {
            caplet_price_mc(paths, *expiry, tenor.years(), *strike, *notional)?
        }
        ProductSpec::Swaption { schedule, strike, notional } => {
            swaption_price_mc(paths, &schedule_from_dates(schedule)?, *strike, *notional)?
        }
        _ => return Err(Error::InvalidInput("linear products are priced off curves".into())),
    };
    Ok(PricingReport { price: est.mean, std_error: Some(est.std_error), par_rate: None, legs: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tenor(d: f64) -> Tenor {
        Tenor::new(d).unwrap()
    }

    #[test]
    fn fra_hand_example() {
        let disc = DiscountCurve::from_pillars(&[(1.0, 0.98), (2.0, 0.95)]).unwrap();
        let s = SpreadCurve::flat(tenor(1.0), 1.002, 2.0).unwrap();
        let v = fra_value(&disc, &s, 1.0, 0.03, 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.98 * 1.002 - 0.95 * 1.03, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.00346, epsilon = 1e-12);
    }

    #[test]
    fn one_period_swap_is_a_fra() {
        let disc = DiscountCurve::flat(0.02, &[1.0, 3.0]).unwrap();
        let s = SpreadCurve::from_pillars(tenor(0.5), &[(0.0, 1.001), (3.0, 1.004)]).unwrap();
        let sch = Schedule::new(1.0, 0.5, 1).unwrap();
        let a = irs_value(&disc, &s, &sch, 0.025, 100.0).unwrap();
        let b = fra_value(&disc, &s, 1.0, 0.025, 100.0).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-13);
    }

    #[test]
    fn unit_spread_irs_is_ois() {
        let disc = DiscountCurve::flat(0.03, &[5.0]).unwrap();
        let s = SpreadCurve::flat(tenor(0.5), 1.0, 5.0).unwrap();
        let sch = Schedule::new(0.0, 0.5, 8).unwrap();
        assert_abs_diff_eq!(
            irs_swap_rate(&disc, &s, &sch).unwrap(),
            ois_swap_rate(&disc, &sch).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn basis_spread_sign_and_antisymmetry() {
        let disc = DiscountCurve::flat(0.02, &[2.0]).unwrap();
        let s6 = SpreadCurve::flat(tenor(0.5), 1.004, 2.0).unwrap();
        let s3 = SpreadCurve::flat(tenor(0.25), 1.001, 2.0).unwrap();
        let l6 = Schedule::new(0.0, 0.5, 2).unwrap();
        let l3 = Schedule::new(0.0, 0.25, 4).unwrap();
        let k = basis_swap_spread(&disc, &s6, &s3, &l6, &l3, &l3).unwrap();
        assert!(k > 0.0);
        let back = basis_swap_spread(&disc, &s3, &s6, &l3, &l6, &l3).unwrap();
        assert_eq!(k, -back);
        let bad = Schedule::new(0.0, 0.5, 3).unwrap();
        assert!(basis_swap_spread(&disc, &s6, &s3, &bad, &l3, &l3).is_err());
    }
}
