use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DATE_EPS;

/// Accrual period of a floating rate, as a year fraction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Tenor(f64);

impl Tenor {
    pub fn new(years: f64) -> Result<Self> {
        if years.is_finite() && years > 0.0 {
            Ok(Self(years))
        } else {
            Err(Error::InvalidInput(format!("tenor must be positive, got {years}")))
        }
    }

    pub fn years(self) -> f64 {
        self.0
    }

    /// Parse `3M`, `1Y`, `2W`, a fraction such as `1/4`, or a decimal.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        let bad = || Error::InvalidInput(format!("cannot parse tenor '{text}'"));
        if let Some((num, den)) = s.split_once('/') {
            let n: f64 = num.trim().parse().map_err(|_| bad())?;
            let d: f64 = den.trim().parse().map_err(|_| bad())?;
            return Self::new(n / d);
        }
        let upper = s.to_ascii_uppercase();
        let (head, unit) = upper.split_at(upper.len().saturating_sub(1));
        let per_year = match unit {
            "M" => Some(12.0),
            "Y" => Some(1.0),
            "W" => Some(52.0),
            "D" => Some(365.0),
            _ => None,
        };
        match per_year {
            Some(p) => {
                let n: f64 = head.parse().map_err(|_| bad())?;
                Self::new(n / p)
            }
            None => Self::new(s.parse().map_err(|_| bad())?),
        }
    }
}

impl TryFrom<f64> for Tenor {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Tenor> for f64 {
    fn from(t: Tenor) -> f64 {
        t.0
    }
}

/// Uniform payment schedule `T_i = start + i * tenor`, `i = 0..=periods`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: f64,
    pub tenor: f64,
    pub periods: usize,
}

impl Schedule {
    pub fn new(start: f64, tenor: f64, periods: usize) -> Result<Self> {
        if !(start >= 0.0) || !(tenor > 0.0) || periods == 0 {
            return Err(Error::InvalidSchedule(format!("start={start}, tenor={tenor}, periods={periods}")));
        }
        Ok(Self { start, tenor, periods })
    }

    /// Schedule from `start` to `end` with spacing `tenor`; the span must be
    /// a whole number of periods.
    pub fn spanning(start: f64, end: f64, tenor: f64) -> Result<Self> {
        let n = ((end - start) / tenor).round();
        if n < 1.0 || ((start + n * tenor) - end).abs() > DATE_EPS {
            return Err(Error::InvalidSchedule(format!("[{start}, {end}] is not a whole number of {tenor}-periods")));
        }
        Self::new(start, tenor, n as usize)
    }

    pub fn date(&self, i: usize) -> f64 {
        self.start + i as f64 * self.tenor
    }

    pub fn end(&self) -> f64 {
        self.date(self.periods)
    }

    /// All dates `T_0, ..., T_n`.
    pub fn dates(&self) -> Vec<f64> {
        (0..=self.periods).map(|i| self.date(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(Tenor::parse("3M").unwrap().years(), 0.25);
        assert_eq!(Tenor::parse("1y").unwrap().years(), 1.0);
        assert_eq!(Tenor::parse("1/12").unwrap().years(), 1.0 / 12.0);
        assert_eq!(Tenor::parse("0.5").unwrap().years(), 0.5);
        assert!(Tenor::parse("-1").is_err());
        assert!(Tenor::parse("abc").is_err());
    }

    #[test]
    fn schedule_spanning_checks_whole_periods() {
        let s = Schedule::spanning(0.0, 2.0, 0.5).unwrap();
        assert_eq!(s.periods, 4);
        assert_eq!(s.dates(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(Schedule::spanning(0.0, 1.2, 0.5).is_err());
    }
}
