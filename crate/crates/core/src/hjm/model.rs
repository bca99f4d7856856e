use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment::KernelObjective;
use crate::termstructure::CurveSet;

use super::levy::{dot, LevyTriplet};
use super::vol::VolatilitySpec;

/// State space `C` of `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Cone {
    #[default]
    Whole,
    /// `R^n_+`; its dual cone is again `R^n_+`.
    NonNegative,
}

/// How `Y` is completed beyond the driver component `Y-hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum YMode {
    /// `Y = Y-hat`; consistency is not enforced.
    #[default]
    None,
    /// `Y = Y-hat + int q ds` with `u_i . q` matching the short end of each
    /// forward spread curve (least squares when `m > n`).
    Integrated,
    /// `Y = Y-hat + Y-perp`, where `Y-perp` is a pure-jump process whose
    /// kernel solves the moment problem at the current short-end spreads.
    /// Requires `n = 1`.
    Kernel {
        cap: f64,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
        #[serde(default)]
        objective: KernelObjective,
    },
}

fn default_grid_size() -> usize {
    400
}

/// Lévy-driven HJM multiple-curve model built from its building blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyHjmModel {
    /// Joint triplet of `(X, Y-hat)`, `X` first; dimension `d + n`.
    pub driver: LevyTriplet,
    pub vols: VolatilitySpec,
    /// Spot-spread loadings `u_i` in `R^n`, one per spread curve.
    pub u: Vec<Vec<f64>>,
    /// Initial `Y_0`; defaults to the least-squares fit of `u_i . Y_0` to
    /// the initial log spot spreads.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default)]
    pub y_mode: YMode,
    #[serde(default)]
    pub cone: Cone,
    /// Initial OIS discount curve and one spread curve per `u_i`.
    pub curves: CurveSet,
}

impl LevyHjmModel {
    /// Dimension `d` of `X`.
    pub fn x_dim(&self) -> usize {
        self.vols.ois.len()
    }

    /// Dimension `n` of `Y`.
    pub fn y_dim(&self) -> usize {
        self.driver.dim() - self.x_dim()
    }

    pub fn n_spreads(&self) -> usize {
        self.u.len()
    }

    pub fn tenors(&self) -> Vec<f64> {
        self.curves.spreads.iter().map(|c| c.tenor().years()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.driver.validate()?;
        let d = self.x_dim();
        if self.driver.dim() < d {
            return Err(Error::DimensionMismatch { expected: d, got: self.driver.dim() });
        }
        let n = self.y_dim();
        let m = self.n_spreads();
        self.vols.validate(d, m)?;
        if self.curves.spreads.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.curves.spreads.len() });
        }
        for u in &self.u {
            if u.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: u.len() });
            }
            if self.cone == Cone::NonNegative && u.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidInput("loadings must lie in the dual cone R^n_+".into()));
            }
        }
        if let Some(y0) = &self.y0 {
            if y0.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: y0.len() });
            }
        }
        if let YMode::Kernel { cap, grid_size, .. } = self.y_mode {
            if n != 1 {
                return Err(Error::InvalidInput("kernel mode needs a one-dimensional Y".into()));
            }
            let us: Vec<f64> = self.u.iter().map(|u| u[0]).collect();
            if us[0] <= 0.0 || us.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput("kernel mode needs 0 < u_1 < ... < u_m".into()));
            }
            if !(cap > 0.0) || grid_size < 2 {
                return Err(Error::InvalidInput("kernel mode needs cap > 0 and grid_size >= 2".into()));
            }
        }
        Ok(())
    }

    /// Whether `u_1 <= ... <= u_m` componentwise in `C^* = R^n_+`, the
    /// premise of ordered spreads.
    pub fn loadings_ordered(&self) -> bool {
        self.cone == Cone::NonNegative && self.u.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b))
    }

    pub fn x_triplet(&self) -> LevyTriplet {
        self.driver.marginal(&(0..self.x_dim()).collect::<Vec<_>>())
    }

    pub fn y_triplet(&self) -> LevyTriplet {
        self.driver.marginal(&(self.x_dim()..self.driver.dim()).collect::<Vec<_>>())
    }

    /// `Y_0`, fitted to the initial spot spreads when not given.
    pub fn initial_y(&self) -> Result<Vec<f64>> {
        if let Some(y0) = &self.y0 {
            return Ok(y0.clone());
        }
        let logs: Vec<f64> = self.curves.spreads.iter().map(|c| c.log_spread(0.0)).collect::<Result<_>>()?;
        let y = least_squares(&self.u, &logs, self.y_dim());
        Ok(match self.cone {
            Cone::NonNegative => y.into_iter().map(|v| v.max(0.0)).collect(),
            Cone::Whole => y,
        })
    }

    /// Joint exponent argument `(Sigma^i - Sigma^0, u_i)` at time-to-maturity `tau`.
    fn joint_argument(&self, i: usize, tau: f64) -> Vec<f64> {
        let s0 = self.vols.big_sigma(0, tau);
        let si = self.vols.big_sigma(i + 1, tau);
        si.iter().zip(&s0).map(|(a, b)| a - b).chain(self.u[i].iter().copied()).collect()
    }

    /// OIS forward drift `alpha~_t(T) = d/dT Psi^X(-Sigma~_t(T))`.
    pub fn ois_drift(&self, t: f64, maturity: f64) -> Result<f64> {
        let tau = check_tau(t, maturity)?;
        let beta: Vec<f64> = self.vols.big_sigma(0, tau).iter().map(|v| -v).collect();
        let grad = self.x_triplet().gradient(&beta)?;
        Ok(-dot(&grad, &self.vols.sigma(0, tau)))
    }

    /// Drift of forward spread rate `i` (0-based):
    /// `-d/dT Psi^{Y,X}((u_i, Sigma^i - Sigma~)) + d/dT Psi^X(-Sigma~)`.
    pub fn spread_drift(&self, i: usize, t: f64, maturity: f64) -> Result<f64> {
        if i >= self.n_spreads() {
            return Err(Error::DimensionMismatch { expected: self.n_spreads(), got: i + 1 });
        }
        let tau = check_tau(t, maturity)?;
        let grad = self.driver.gradient(&self.joint_argument(i, tau))?;
        let s0 = self.vols.sigma(0, tau);
        let si = self.vols.sigma(i + 1, tau);
        let dv: Vec<f64> = si.iter().zip(&s0).map(|(a, b)| a - b).collect();
        Ok(-dot(&grad[..self.x_dim()], &dv) + self.ois_drift(t, maturity)?)
    }

    /// `G^0(tau) = Psi^X(-Sigma~(tau))`, the integrated OIS drift over
    /// `[t, t + tau]`.
    pub(crate) fn integrated_ois_drift(&self, x: &LevyTriplet, big0: &[f64]) -> f64 {
        let beta: Vec<f64> = big0.iter().map(|v| -v).collect();
        x.exponent_unchecked(&beta)
    }

    /// `G^i(tau) = Psi^Y(u_i) - Psi^{X,Y}((Sigma^i - Sigma~, u_i)) + G^0(tau)`.
    pub(crate) fn integrated_spread_drift(&self, i: usize, psi_y: f64, big0: &[f64], bigi: &[f64], g0: f64) -> f64 {
        let arg: Vec<f64> = bigi.iter().zip(big0).map(|(a, b)| a - b).chain(self.u[i].iter().copied()).collect();
        psi_y - self.driver.exponent_unchecked(&arg) + g0
    }
}

fn check_tau(t: f64, maturity: f64) -> Result<f64> {
    let tau = maturity - t;
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("maturity {maturity} precedes time {t}")));
    }
    Ok(tau)
}

/// Minimum-norm least-squares solution of `rows . q = rhs`.
pub(crate) fn least_squares(rows: &[Vec<f64>], rhs: &[f64], n: usize) -> Vec<f64> {
    if n == 0 || rows.is_empty() {
        return vec![0.0; n];
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-12).map(|x| x.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; n])
}
