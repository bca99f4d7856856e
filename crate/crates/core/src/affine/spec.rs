use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical state space `R^p_+ x R^q` of `X`; positive coordinates come first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub pos_dims: usize,
    pub real_dims: usize,
}

impl StateSpace {
    pub fn dim(&self) -> usize {
        self.pos_dims + self.real_dims
    }
}

/// Jump of fixed size arriving with intensity `intensity + <loadings, x>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineJump {
    pub size: Vec<f64>,
    pub intensity: f64,
    /// State loadings of the intensity; only positive coordinates may load.
    #[serde(default)]
    pub loadings: Vec<f64>,
}

impl AffineJump {
    pub fn loading(&self, k: usize) -> f64 {
        self.loadings.get(k).copied().unwrap_or(0.0)
    }
}

/// Drift `b + beta x`, diffusion `a + sum_k x_k alpha_k` and jumps of `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XDynamics {
    pub b: Vec<f64>,
    /// `beta[i][k]`: sensitivity of the drift of `X_i` to `x_k`.
    pub beta: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    /// One matrix per positive coordinate.
    #[serde(default)]
    pub alpha: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub jumps: Vec<AffineJump>,
}

/// Dynamics of `Y`; its characteristics depend on `X` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum YDynamics {
    /// `dY = (drift + loading x) dt + dW^Y`, with constant covariance `cov`
    /// and covariance `cross` (`d x n`) against the diffusion of `X`.
    Diffusive { drift: Vec<f64>, loading: Vec<Vec<f64>>, cov: Vec<Vec<f64>>, cross: Vec<Vec<f64>> },
    /// `Y = Y_0 + int_0^t (q0 + q X_s) ds`.
    Integrated { q0: Vec<f64>, q: Vec<Vec<f64>> },
}

impl YDynamics {
    pub fn dim(&self) -> usize {
        match self {
            Self::Diffusive { drift, .. } => drift.len(),
            Self::Integrated { q0, .. } => q0.len(),
        }
    }

    pub fn drift(&self) -> (&[f64], &[Vec<f64>]) {
        match self {
            Self::Diffusive { drift, loading, .. } => (drift, loading),
            Self::Integrated { q0, q } => (q0, q),
        }
    }

    /// `(cov, cross)`, or `None` for the integrated mode.
    pub fn noise(&self) -> Option<(&[Vec<f64>], &[Vec<f64>])> {
        match self {
            Self::Diffusive { cov, cross, .. } => Some((cov, cross)),
            Self::Integrated { .. } => None,
        }
    }
}

/// `r_t = l + <lambda, X_t>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortRate {
    pub l: f64,
    pub lambda: Vec<f64>,
}

/// Affine multiple-curve model for `(X, Y, Z)` with `Z = -int r ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModelSpec {
    pub state: StateSpace,
    pub x: XDynamics,
    pub y: YDynamics,
    pub rate: ShortRate,
    /// Spread loadings `u_i`, one per tenor.
    pub u: Vec<Vec<f64>>,
    pub tenors: Vec<f64>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

impl AffineModelSpec {
    pub fn x_dim(&self) -> usize {
        self.state.dim()
    }

    pub fn y_dim(&self) -> usize {
        self.y.dim()
    }

    /// Index of the spread with tenor `delta`.
    pub fn tenor_index(&self, delta: f64) -> Result<usize> {
        self.tenors
            .iter()
            .position(|&d| (d - delta).abs() <= crate::pathset::TIME_EPS)
            .ok_or_else(|| Error::InvalidInput(format!("model has no spread for tenor {delta}")))
    }

    pub(crate) fn alpha(&self, k: usize) -> Option<&Vec<Vec<f64>>> {
        self.x.alpha.get(k).filter(|_| k < self.state.pos_dims)
    }

    /// Constant joint covariance of `(X, Y)`.
    pub(crate) fn joint_constant_cov(&self) -> DMatrix<f64> {
        let (d, n) = (self.x_dim(), self.y_dim());
        let mut m = DMatrix::zeros(d + n, d + n);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = self.x.a[i][j];
            }
        }
        if let Some((cov, cross)) = self.y.noise() {
            for i in 0..n {
                for j in 0..n {
                    m[(d + i, d + j)] = cov[i][j];
                }
            }
            for i in 0..d {
                for j in 0..n {
                    m[(i, d + j)] = cross[i][j];
                    m[(d + j, i)] = cross[i][j];
                }
            }
        }
        m
    }

    /// Admissibility on `R^p_+ x R^q` plus dimension checks.
    pub fn validate(&self) -> Result<()> {
        let (p, d, n) = (self.state.pos_dims, self.x_dim(), self.y_dim());
        let dims = |what: &str, got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(Error::Inadmissible(format!("{what} has length {got}, expected {expected}")))
            }
        };
        let square = |what: &str, m: &[Vec<f64>], rows: usize, cols: usize| -> Result<()> {
            dims(what, m.len(), rows)?;
            m.iter().try_for_each(|r| dims(what, r.len(), cols))
        };
        dims("x.b", self.x.b.len(), d)?;
        square("x.beta", &self.x.beta, d, d)?;
        square("x.a", &self.x.a, d, d)?;
        if self.x.alpha.len() > p {
            return Err(Error::Inadmissible("alpha is only allowed for positive coordinates".into()));
        }
        for alpha in &self.x.alpha {
            square("x.alpha", alpha, d, d)?;
        }
        let (drift, loading) = self.y.drift();
        dims("y drift", drift.len(), n)?;
        square("y loading", loading, n, d)?;
        if let Some((cov, cross)) = self.y.noise() {
            square("y.cov", cov, n, n)?;
            square("y.cross", cross, d, n)?;
        }
        dims("rate.lambda", self.rate.lambda.len(), d)?;
        dims("x0", self.x0.len(), d)?;
        dims("y0", self.y0.len(), n)?;
        dims("tenors", self.tenors.len(), self.u.len())?;
        for u in &self.u {
            dims("u", u.len(), n)?;
        }
        if self.tenors.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Inadmissible("tenors must be positive".into()));
        }

        psd("constant covariance", &self.joint_constant_cov())?;
        for (k, alpha) in self.x.alpha.iter().enumerate() {
            psd("alpha", &DMatrix::from_fn(d, d, |i, j| alpha[i][j]))?;
            for i in 0..p {
                if i != k && (0..d).any(|j| alpha[i][j] != 0.0 || alpha[j][i] != 0.0) {
                    return Err(Error::Inadmissible(format!("alpha_{k} must vanish on positive coordinate {i}")));
                }
            }
        }
        for i in 0..p {
            if (0..d).any(|j| self.x.a[i][j] != 0.0) {
                return Err(Error::Inadmissible(format!("constant diffusion must vanish on positive coordinate {i}")));
            }
            if self.x.b[i] < 0.0 {
                return Err(Error::Inadmissible(format!("drift constant of positive coordinate {i} is negative")));
            }
            for k in 0..d {
                let v = self.x.beta[i][k];
                if k != i && ((k < p && v < 0.0) || (k >= p && v != 0.0)) {
                    return Err(Error::Inadmissible(format!("drift of positive coordinate {i} does not point inward")));
                }
            }
            if self.x0[i] < 0.0 {
                return Err(Error::Inadmissible(format!("x0[{i}] is negative")));
            }
        }
        for jump in &self.x.jumps {
            dims("jump size", jump.size.len(), d)?;
            if !jump.loadings.is_empty() {
                dims("jump loadings", jump.loadings.len(), d)?;
            }
            if jump.intensity < 0.0
                || (0..d).any(|k| (k < p && jump.loading(k) < 0.0) || (k >= p && jump.loading(k) != 0.0))
            {
                return Err(Error::Inadmissible(
                    "jump intensity must be nonnegative and load on positive coordinates only".into(),
                ));
            }
            if jump.size[..p].iter().any(|&s| s < 0.0) {
                return Err(Error::Inadmissible("jumps of positive coordinates must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// One-factor Vasicek short rate `dr = kappa (theta - r) dt + sigma dW`
    /// with no spreads.
    pub fn vasicek(kappa: f64, theta: f64, sigma: f64, r0: f64) -> Self {
        Self {
            state: StateSpace { pos_dims: 0, real_dims: 1 },
            x: XDynamics {
                b: vec![kappa * theta],
                beta: vec![vec![-kappa]],
                a: vec![vec![sigma * sigma]],
                alpha: vec![],
                jumps: vec![],
            },
            y: YDynamics::Integrated { q0: vec![], q: vec![] },
            rate: ShortRate { l: 0.0, lambda: vec![1.0] },
            u: vec![],
            tenors: vec![],
            x0: vec![r0],
            y0: vec![],
        }
    }

    /// One-factor CIR short rate `dr = kappa (theta - r) dt + sigma sqrt(r) dW`.
    pub fn cir(kappa: f64, theta: f64, sigma: f64, r0: f64) -> Self {
        Self {
            state: StateSpace { pos_dims: 1, real_dims: 0 },
            x: XDynamics {
                b: vec![kappa * theta],
                beta: vec![vec![-kappa]],
                a: vec![vec![0.0]],
                alpha: vec![vec![vec![sigma * sigma]]],
                jumps: vec![],
            },
            ..Self::vasicek(kappa, theta, 0.0, r0)
        }
    }
}

fn psd(what: &str, m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if n == 0 {
        return Ok(());
    }
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-14 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::Inadmissible(format!("{what} is not symmetric")));
            }
        }
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min < -1e-12 * scale {
        return Err(Error::Inadmissible(format!("{what} is not positive semidefinite (eigenvalue {min:e})")));
    }
    Ok(())
}
