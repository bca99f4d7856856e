//! Monte Carlo output shared by the simulating engines and the pricers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maturities and times are matched to within this tolerance.
pub const TIME_EPS: f64 = 1e-9;

/// Model state at one observation time `t`, across all paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    /// Absolute maturities `T_j >= t` at which curves are recorded.
    pub maturities: Vec<f64>,
    /// Bank account `B_t` per path.
    pub numeraire: Vec<f64>,
    /// `B(t, T_j)`, stored path-major: `[path * maturities.len() + j]`.
    pub discount: Vec<f64>,
    /// `S^{delta_k}(t, T_j)` per tenor `k`, same layout as `discount`.
    pub spreads: Vec<Vec<f64>>,
}

impl Observation {
    pub fn n_paths(&self) -> usize {
        self.numeraire.len()
    }

    pub fn maturity_index(&self, maturity: f64) -> Result<usize> {
        self.maturities
            .iter()
            .position(|&m| (m - maturity).abs() <= TIME_EPS)
            .ok_or(Error::MissingObservation { time: self.time, maturity })
    }

    pub fn discount(&self, path: usize, j: usize) -> f64 {
        self.discount[path * self.maturities.len() + j]
    }

    pub fn spread(&self, tenor: usize, path: usize, j: usize) -> f64 {
        self.spreads[tenor][path * self.maturities.len() + j]
    }
}

/// Simulated paths recorded at a set of observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    /// Number of surviving paths (aborted paths are dropped).
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub tenors: Vec<f64>,
    pub observations: Vec<Observation>,
    /// Paths dropped by the non-finite-state guard.
    pub aborted: usize,
}

impl PathSet {
    pub fn observation(&self, time: f64) -> Result<&Observation> {
        if self.n_paths == 0 {
            return Err(Error::EmptyPathSet);
        }
        self.observations
            .iter()
            .find(|o| (o.time - time).abs() <= TIME_EPS)
            .ok_or(Error::MissingObservation { time, maturity: f64::NAN })
    }

    pub fn tenor_index(&self, tenor: f64) -> Result<usize> {
        self.tenors
            .iter()
            .position(|&d| (d - tenor).abs() <= TIME_EPS)
            .ok_or_else(|| Error::InvalidInput(format!("path set carries no spread for tenor {tenor}")))
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Result<Self> {
        // Welford's update keeps the variance accurate for tiny spreads.
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        if n == 0 {
            return Err(Error::EmptyPathSet);
        }
        let var = if n > 1 { (m2 / (n - 1) as f64).max(0.0) } else { 0.0 };
        Ok(Self { mean, std_error: (var / n as f64).sqrt(), n })
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self { mean: self.mean * factor, std_error: self.std_error * factor.abs(), n: self.n }
    }

    /// `|mean - target|` in units of the standard error (infinite when the
    /// estimate is exact but off target).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if self.std_error > 0.0 {
            gap / self.std_error
        } else if gap <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = McEstimate::from_samples([2.0; 10]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.z_score(2.0), 0.0);
    }

    #[test]
    fn estimate_matches_textbook_formula() {
        let e = McEstimate::from_samples([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((e.mean - 2.5).abs() < 1e-15);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.std_error - sd / 2.0).abs() < 1e-15);
        assert!(McEstimate::from_samples(std::iter::empty()).is_err());
    }
}
