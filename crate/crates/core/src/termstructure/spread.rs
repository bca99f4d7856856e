use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{DiscountCurve, Tenor, DATE_EPS};

/// Interpolation rule for spreads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadInterpolation {
    /// Linear in `ln S`, i.e. piecewise-constant forward spread rates.
    #[default]
    LinearOnLogSpread,
}

/// FRA rate implied by a multiplicative spread: `L = (S (1 + delta L^D) - 1) / delta`.
pub fn fra_rate(spread: f64, ois_forward: f64, delta: f64) -> f64 {
    (spread * (1.0 + delta * ois_forward) - 1.0) / delta
}

/// Multiplicative spread `S = (1 + delta L) / (1 + delta L^D)`.
pub fn spread_from_rates(fra: f64, ois_forward: f64, delta: f64) -> f64 {
    (1.0 + delta * fra) / (1.0 + delta * ois_forward)
}

/// Multiplicative FRA/OIS spread curve `S^delta(0, T)` for one tenor.
///
/// A curve whose first pillar lies after 0 is extended flat back to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadCurve {
    tenor: Tenor,
    maturities: Vec<f64>,
    log_spreads: Vec<f64>,
    #[serde(default)]
    interpolation: SpreadInterpolation,
    #[serde(default)]
    extrapolate: bool,
}

impl SpreadCurve {
    pub fn from_pillars(tenor: Tenor, pillars: &[(f64, f64)]) -> Result<Self> {
        let Some(&(t0, s0)) = pillars.first() else {
            return Err(Error::EmptyQuotes(format!("spread curve for tenor {}", tenor.years())));
        };
        let mut maturities = Vec::with_capacity(pillars.len() + 1);
        let mut logs = Vec::with_capacity(pillars.len() + 1);
        if t0 > DATE_EPS && s0 > 0.0 {
            maturities.push(0.0);
            logs.push(s0.ln());
        }
        for &(t, s) in pillars {
            if !(t.is_finite() && t >= -DATE_EPS && s.is_finite() && s > 0.0) {
                return Err(Error::InvalidInput(format!("bad spread pillar ({t}, {s})")));
            }
            let t = if t.abs() <= DATE_EPS { 0.0 } else { t };
            if let Some(&prev) = maturities.last() {
                if t <= prev {
                    return Err(Error::NonIncreasingMaturities { previous: prev, next: t });
                }
            }
            maturities.push(t);
            logs.push(s.ln());
        }
        Ok(Self {
            tenor,
            maturities,
            log_spreads: logs,
            interpolation: SpreadInterpolation::default(),
            extrapolate: false,
        })
    }

    /// Constant spread `s` over `[0, horizon]`.
    pub fn flat(tenor: Tenor, s: f64, horizon: f64) -> Result<Self> {
        Self::from_pillars(tenor, &[(0.0, s), (horizon, s)])
    }

    pub fn with_extrapolation(mut self, enabled: bool) -> Self {
        self.extrapolate = enabled;
        self
    }

    pub fn tenor(&self) -> Tenor {
        self.tenor
    }

    pub fn interpolation(&self) -> SpreadInterpolation {
        self.interpolation
    }

    pub fn last_maturity(&self) -> f64 {
        *self.maturities.last().expect("curve has pillars")
    }

    pub fn pillars(&self) -> Vec<(f64, f64)> {
        self.maturities.iter().zip(&self.log_spreads).map(|(&t, &l)| (t, l.exp())).collect()
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

    fn segment_rate(&self, t: f64) -> (usize, f64) {
        let n = self.maturities.len();
        if n == 1 {
            return (0, 0.0);
        }
        let k = match self.maturities.partition_point(|&m| m <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let slope = (self.log_spreads[k + 1] - self.log_spreads[k]) / (self.maturities[k + 1] - self.maturities[k]);
        (k, slope)
    }

    pub fn log_spread(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        let t = t.max(0.0);
        let (k, slope) = self.segment_rate(t);
        Ok(self.log_spreads[k] + slope * (t - self.maturities[k]))
    }

    /// `S^delta(0, T)`.
    pub fn spread(&self, t: f64) -> Result<f64> {
        Ok(self.log_spread(t)?.exp())
    }

    /// Forward spread rate `eta(T) = d/dT ln S(0, T)`, right-continuous at pillars.
    pub fn forward_spread_rate(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.segment_rate(t.max(0.0)).1)
    }

    /// Par FRA rate `L_0(T, T + delta)`.
    pub fn fra_rate(&self, disc: &DiscountCurve, t: f64) -> Result<f64> {
        let d = self.tenor.years();
        Ok(fra_rate(self.spread(t)?, disc.simple_forward(t, d)?, d))
    }
}
