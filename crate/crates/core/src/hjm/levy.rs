use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atom of a finite-activity discrete Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    pub size: Vec<f64>,
    pub intensity: f64,
}

/// Lévy triplet `(b, c, K)` with a finite discrete Lévy measure and no
/// truncation function: the exponent is
/// `Psi(beta) = beta.b + beta.c.beta / 2 + sum_j lambda_j (e^{beta.xi_j} - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub b: Vec<f64>,
    /// Row-major covariance rows.
    pub c: Vec<Vec<f64>>,
    #[serde(default)]
    pub jumps: Vec<JumpAtom>,
}

impl LevyTriplet {
    pub fn brownian(cov: Vec<Vec<f64>>) -> Self {
        Self { b: vec![0.0; cov.len()], c: cov, jumps: Vec::new() }
    }

    /// Standard `dim`-dimensional Brownian motion.
    pub fn standard(dim: usize) -> Self {
        let c = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self::brownian(c)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.c[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.c.len() != d || self.c.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: self.c.len() });
        }
        for j in &self.jumps {
            if j.size.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: j.size.len() });
            }
            if !(j.intensity > 0.0 && j.intensity.is_finite()) {
                return Err(Error::InvalidInput(format!("jump intensity must be positive, got {}", j.intensity)));
            }
        }
        let c = self.covariance();
        if (&c - c.transpose()).amax() > 1e-12 * c.amax().max(1.0) {
            return Err(Error::InvalidInput("covariance must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(c.clone());
        if eig.eigenvalues.min() < -1e-12 * c.amax().max(1.0) {
            return Err(Error::InvalidInput("covariance must be positive semi-definite".into()));
        }
        Ok(())
    }

    /// Symmetric square root factor `L` with `L L^T = c`.
    pub fn diffusion_factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.covariance());
        let sq = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        &eig.eigenvectors * sq
    }

    fn check(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: beta.len() });
        }
        Ok(())
    }

    /// `Psi(beta)`.
    pub fn exponent(&self, beta: &[f64]) -> Result<f64> {
        self.check(beta)?;
        Ok(self.exponent_unchecked(beta))
    }

    pub(crate) fn exponent_unchecked(&self, beta: &[f64]) -> f64 {
        let mut v = dot(beta, &self.b);
        for (i, row) in self.c.iter().enumerate() {
            v += 0.5 * beta[i] * dot(row, beta);
        }
        for j in &self.jumps {
            v += j.intensity * dot(beta, &j.size).exp_m1();
        }
        v
    }

    /// `grad Psi(beta) = b + c beta + sum_j lambda_j xi_j e^{beta.xi_j}`.
    pub fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check(beta)?;
        let mut g: Vec<f64> = self.c.iter().zip(&self.b).map(|(row, b)| b + dot(row, beta)).collect();
        for j in &self.jumps {
            let e = j.intensity * dot(beta, &j.size).exp();
            for (gi, xi) in g.iter_mut().zip(&j.size) {
                *gi += e * xi;
            }
        }
        Ok(g)
    }

    /// Triplet of the sub-vector with the given component indices.
    pub fn marginal(&self, idx: &[usize]) -> Self {
        let b = idx.iter().map(|&i| self.b[i]).collect();
        let c = idx.iter().map(|&i| idx.iter().map(|&j| self.c[i][j]).collect()).collect();
        let jumps = self
            .jumps
            .iter()
            .map(|j| JumpAtom { size: idx.iter().map(|&i| j.size[i]).collect(), intensity: j.intensity })
            .filter(|j| j.size.iter().any(|&x| x != 0.0))
            .collect();
        Self { b, c, jumps }
    }

    /// Exact sampler of increments over a fixed `dt`.
    pub fn increment_sampler(&self, dt: f64) -> IncrementSampler {
        let d = self.dim();
        let factor = self.diffusion_factor() * dt.sqrt();
        let columns = (0..d)
            .map(|k| {
                let col: Vec<f64> = factor.column(k).iter().copied().collect();
                col.iter().any(|&v| v != 0.0).then_some(col)
            })
            .collect();
        let jumps = self
            .jumps
            .iter()
            .map(|j| (Poisson::new(j.intensity * dt).expect("positive intensity"), j.size.clone()))
            .collect();
        IncrementSampler { drift: self.b.iter().map(|b| b * dt).collect(), columns, jumps }
    }
}

/// Gaussian part through a square-root factor of `c dt`, plus independent
/// Poisson counts per jump atom.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    drift: Vec<f64>,
    /// Columns of the scaled factor; `None` for all-zero columns (a normal
    /// is still drawn so the stream layout does not depend on the values).
    columns: Vec<Option<Vec<f64>>>,
    jumps: Vec<(Poisson<f64>, Vec<f64>)>,
}

impl IncrementSampler {
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        out.copy_from_slice(&self.drift);
        for col in &self.columns {
            let z: f64 = rng.sample(StandardNormal);
            if let Some(col) = col {
                for (o, c) in out.iter_mut().zip(col) {
                    *o += c * z;
                }
            }
        }
        for (poisson, size) in &self.jumps {
            let n = poisson.sample(rng);
            if n > 0.0 {
                for (o, xi) in out.iter_mut().zip(size) {
                    *o += n * xi;
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
