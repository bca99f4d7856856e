//! Tidy `(x, series, value)` plot data.

use multicurve::termstructure::{CurveSet, DiscountCurve, SpreadCurve};

use crate::io::tenor_label;

pub const TIDY_HEADER: [&str; 3] = ["x", "series", "value"];

/// One plotted point; rows are emitted series by series, `x` increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub x: f64,
    pub series: String,
    pub value: f64,
}

impl PlotRow {
    pub fn record(&self) -> Vec<String> {
        vec![self.x.to_string(), self.series.clone(), self.value.to_string()]
    }
}

/// `n` equally spaced points on `[0, end]`.
pub fn sample_grid(end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![end],
        _ => (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn spread_series(curve: &SpreadCurve) -> String {
    format!("S_{}", tenor_label(curve.tenor().years()))
}

pub fn discount_rows(curve: &DiscountCurve, n: usize) -> multicurve::Result<Vec<PlotRow>> {
    let grid = sample_grid(curve.last_maturity(), n);
    let mut rows = Vec::with_capacity(3 * n);
    for &x in &grid {
        rows.push(PlotRow { x, series: "B".into(), value: curve.discount(x)? });
    }
    for &x in &grid {
        rows.push(PlotRow { x, series: "f".into(), value: curve.instantaneous_forward(x)? });
    }
    Ok(rows)
}

/// Each spread curve sampled at `n` points on `[0, last pillar]`; no curves
/// give no rows.
pub fn spread_rows(curves: &[SpreadCurve], n: usize) -> multicurve::Result<Vec<PlotRow>> {
    let mut rows = Vec::with_capacity(curves.len() * n);
    for c in curves {
        let series = spread_series(c);
        for x in sample_grid(c.last_maturity(), n) {
            rows.push(PlotRow { x, series: series.clone(), value: c.spread(x)? });
        }
    }
    Ok(rows)
}

/// Step of the one-sided difference quotient used for `eta`.
pub const ETA_STEP: f64 = 1e-6;

/// Forward spread rate `d/dT log S(0, T)` by a forward difference of the
/// stored interpolant (backward at the last pillar).
pub fn eta_points(curve: &SpreadCurve, n: usize) -> multicurve::Result<Vec<(f64, f64)>> {
    let end = curve.last_maturity();
    sample_grid(end, n)
        .into_iter()
        .map(|t| {
            let (a, b) = if t + ETA_STEP <= end { (t, t + ETA_STEP) } else { (t - ETA_STEP, t) };
            Ok((t, (curve.log_spread(b)? - curve.log_spread(a)?) / (b - a)))
        })
        .collect()
}

pub fn curve_set_rows(curves: &CurveSet, n: usize) -> multicurve::Result<Vec<PlotRow>> {
    let mut rows = discount_rows(&curves.discount, n)?;
    rows.extend(spread_rows(&curves.spreads, n)?);
    Ok(rows)
}
