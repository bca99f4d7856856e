use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Schedule, Tenor, DATE_EPS};

/// Par OIS swap quote; the swap starts at 0 and pays every `tenor` until
/// `maturity`. A maturity shorter than the tenor is a single period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OisQuote {
    pub maturity: f64,
    pub rate: f64,
    pub tenor: Tenor,
}

impl OisQuote {
    pub fn schedule(&self) -> Result<Schedule> {
        let d = self.tenor.years();
        if self.maturity <= d + DATE_EPS {
            Schedule::new(0.0, self.maturity, 1)
        } else {
            Schedule::spanning(0.0, self.maturity, d)
        }
    }
}

/// Instrument behind a Libor-tenor quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "UPPERCASE")]
pub enum SpreadQuoteKind {
    /// FRA on `[maturity, maturity + tenor]`; the quote is its par rate.
    Fra,
    /// Spot-starting IRS ending at `maturity`; the quote is its swap rate.
    Irs,
    /// Spot-starting basis swap of this tenor against `reference`, ending at
    /// `maturity`; the quote is the basis swap spread, with the fixed leg on
    /// the shorter tenor's schedule.
    Basis { reference: Tenor },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadQuote {
    pub kind: SpreadQuoteKind,
    pub tenor: Tenor,
    pub maturity: f64,
    pub quote: f64,
}

impl SpreadQuote {
    /// Date at which this quote pins the spread curve: the fixing date of the
    /// FRA, or the last fixing date of the swap's floating leg.
    pub fn pillar(&self) -> f64 {
        match self.kind {
            SpreadQuoteKind::Fra => self.maturity,
            SpreadQuoteKind::Irs | SpreadQuoteKind::Basis { .. } => self.maturity - self.tenor.years(),
        }
    }
}

/// All quotes needed to build one curve set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketQuoteSet {
    pub ois: Vec<OisQuote>,
    pub spread: Vec<SpreadQuote>,
    /// Year-fraction basis tag; only ACT/365F is supported.
    #[serde(default = "default_basis")]
    pub basis: String,
}

fn default_basis() -> String {
    "ACT/365F".into()
}

impl Default for MarketQuoteSet {
    fn default() -> Self {
        Self { ois: Vec::new(), spread: Vec::new(), basis: default_basis() }
    }
}

impl MarketQuoteSet {
    /// Distinct spread tenors, increasing.
    pub fn tenors(&self) -> Vec<Tenor> {
        let mut t: Vec<Tenor> = Vec::new();
        for q in &self.spread {
            if !t.iter().any(|x| (x.years() - q.tenor.years()).abs() < DATE_EPS) {
                t.push(q.tenor);
            }
        }
        t.sort_by(|a, b| a.years().total_cmp(&b.years()));
        t
    }

    pub fn quotes_for(&self, tenor: Tenor) -> Vec<SpreadQuote> {
        self.spread.iter().filter(|q| (q.tenor.years() - tenor.years()).abs() < DATE_EPS).copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.basis.to_ascii_uppercase();
        if !matches!(b.as_str(), "ACT/365F" | "ACT/365" | "ACT365F" | "ACT/365-FIXED") {
            return Err(Error::InvalidInput(format!("unsupported year-fraction basis '{}'", self.basis)));
        }
        Ok(())
    }
}
