use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Schedule, DATE_EPS};

/// Interpolation rule for discount factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiscountInterpolation {
    /// Linear in `ln B`, i.e. piecewise-constant instantaneous forwards.
    #[default]
    LogLinearDiscount,
}

/// OIS zero-coupon bond prices `B(0, T)`.
///
/// The pillar at `T = 0` (discount 1) is always present. Between pillars
/// `ln B` is linear; beyond the last pillar the curve errors unless
/// extrapolation is enabled, in which case the last forward is held flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountCurve {
    maturities: Vec<f64>,
    log_discounts: Vec<f64>,
    #[serde(default)]
    interpolation: DiscountInterpolation,
    #[serde(default)]
    extrapolate: bool,
}

impl DiscountCurve {
    /// Build from `(maturity, discount)` pillars. A pillar at 0 is prepended
    /// when missing; if given it must equal 1.
    pub fn from_pillars(pillars: &[(f64, f64)]) -> Result<Self> {
        let mut maturities = Vec::with_capacity(pillars.len() + 1);
        let mut logs = Vec::with_capacity(pillars.len() + 1);
        if pillars.first().map_or(true, |p| p.0 > DATE_EPS) {
            maturities.push(0.0);
            logs.push(0.0);
        }
        for &(t, b) in pillars {
            if !(t.is_finite() && b.is_finite() && b > 0.0) {
                return Err(Error::InvalidInput(format!("bad pillar ({t}, {b})")));
            }
            if t.abs() <= DATE_EPS {
                if (b - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("B(0,0) must be 1, got {b}")));
                }
                maturities.push(0.0);
                logs.push(0.0);
                continue;
            }
            if let Some(&prev) = maturities.last() {
                if t <= prev {
                    return Err(Error::NonIncreasingMaturities { previous: prev, next: t });
                }
            }
            maturities.push(t);
            logs.push(b.ln());
        }
        if maturities.len() < 2 {
            return Err(Error::EmptyQuotes("discount curve".into()));
        }
        Ok(Self {
            maturities,
            log_discounts: logs,
            interpolation: DiscountInterpolation::default(),
            extrapolate: false,
        })
    }

    /// Curve `B(0,T) = exp(-r T)` with pillars on the given maturities.
    pub fn flat(rate: f64, maturities: &[f64]) -> Result<Self> {
        let pillars: Vec<_> = maturities.iter().map(|&t| (t, (-rate * t).exp())).collect();
        Self::from_pillars(&pillars)
    }

    pub fn with_extrapolation(mut self, enabled: bool) -> Self {
        self.extrapolate = enabled;
        self
    }

    pub fn extrapolates(&self) -> bool {
        self.extrapolate
    }

    pub fn interpolation(&self) -> DiscountInterpolation {
        self.interpolation
    }

    pub fn last_maturity(&self) -> f64 {
        *self.maturities.last().expect("curve has pillars")
    }

    /// Pillars as `(maturity, discount)`, including the one at 0.
    pub fn pillars(&self) -> Vec<(f64, f64)> {
        self.maturities.iter().zip(&self.log_discounts).map(|(&t, &l)| (t, l.exp())).collect()
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t >= -DATE_EPS) || !t.is_finite() {
            return Err(Error::OutOfDomain(t));
        }
        let last = self.last_maturity();
        if t > last + DATE_EPS && !self.extrapolate {
            return Err(Error::ExtrapolationDisabled { maturity: t, last_pillar: last });
        }
        Ok(())
    }

    /// Segment index `k` with `maturities[k] <= t < maturities[k+1]`,
    /// clamped to the last segment.
    fn segment(&self, t: f64) -> usize {
        let n = self.maturities.len();
        match self.maturities.partition_point(|&m| m <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        }
    }

    fn segment_forward(&self, k: usize) -> f64 {
        let (t0, t1) = (self.maturities[k], self.maturities[k + 1]);
        -(self.log_discounts[k + 1] - self.log_discounts[k]) / (t1 - t0)
    }

    /// `-ln B(0,T) = int_0^T f(u) du`.
    pub fn log_discount(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        let t = t.max(0.0);
        let k = self.segment(t);
        let f = self.segment_forward(k);
        Ok(self.log_discounts[k] - f * (t - self.maturities[k]))
    }

    /// `B(0,T)`.
    pub fn discount(&self, t: f64) -> Result<f64> {
        Ok(self.log_discount(t)?.exp())
    }

    /// Simply compounded forward `L^D(T, T+delta)`.
    pub fn simple_forward(&self, t: f64, delta: f64) -> Result<f64> {
        Ok((self.discount(t)? / self.discount(t + delta)? - 1.0) / delta)
    }

    /// Instantaneous forward `f(T)`, right-continuous at pillars.
    pub fn instantaneous_forward(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.segment_forward(self.segment(t.max(0.0))))
    }

    pub fn zero_rate(&self, t: f64) -> Result<f64> {
        if t <= DATE_EPS {
            return self.instantaneous_forward(0.0);
        }
        Ok(-self.log_discount(t)? / t)
    }

    /// Exact average of `f` over `[a, b]`.
    pub fn average_forward(&self, a: f64, b: f64) -> Result<f64> {
        Ok((self.log_discount(a)? - self.log_discount(b)?) / (b - a))
    }

    /// OIS swap rate `(B(T_0) - B(T_n)) / (delta * sum B(T_i))`.
    pub fn ois_swap_rate(&self, schedule: &Schedule) -> Result<f64> {
        let mut annuity = 0.0;
        for i in 1..=schedule.periods {
            annuity += self.discount(schedule.date(i))?;
        }
        Ok((self.discount(schedule.start)? - self.discount(schedule.end())?) / (schedule.tenor * annuity))
    }
}
