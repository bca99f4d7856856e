use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vasicek-type volatility `scale * exp(-decay * (T - t))` of one driver
/// component; `decay = 0` gives a constant (Ho–Lee) volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpVol {
    pub scale: f64,
    #[serde(default)]
    pub decay: f64,
}

impl ExpVol {
    pub const ZERO: Self = Self { scale: 0.0, decay: 0.0 };

    pub fn constant(scale: f64) -> Self {
        Self { scale, decay: 0.0 }
    }

    pub fn at(&self, tau: f64) -> f64 {
        self.scale * (-self.decay * tau).exp()
    }

    /// `int_0^tau sigma(s) ds`.
    pub fn integral(&self, tau: f64) -> f64 {
        let a = self.decay * tau;
        if a.abs() < 1e-8 {
            self.scale * tau * (1.0 - 0.5 * a)
        } else {
            -self.scale * (-a).exp_m1() / self.decay
        }
    }
}

/// Declared constants of the growth/Lipschitz assumption on a
/// state-dependent volatility: `sup_s |Z(h)(s)| <= c`,
/// `|zeta(h1) - zeta(h2)|_lambda <= l |h1 - h2|_lambda`,
/// `|zeta(h)|_lambda <= m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolBounds {
    pub c: f64,
    pub l: f64,
    pub m: f64,
}

/// Multiplicative state dependence: each curve's volatility is scaled by
/// `clamp(1 + beta * theta(x), floor, cap)`, where `theta` is that curve's
/// own current value at time-to-maturity `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDependence {
    pub beta: f64,
    pub floor: f64,
    pub cap: f64,
    /// Weight `lambda` of the `H^lambda` norm used to validate the bounds.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub bounds: VolBounds,
}

fn default_lambda() -> f64 {
    0.1
}

impl StateDependence {
    pub fn multiplier(&self, theta: f64) -> f64 {
        (1.0 + self.beta * theta).clamp(self.floor, self.cap)
    }
}

/// Volatilities of the OIS forward curve and of each forward spread curve,
/// each a vector over the `d` components of `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilitySpec {
    pub ois: Vec<ExpVol>,
    pub spreads: Vec<Vec<ExpVol>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_dependence: Option<StateDependence>,
}

impl VolatilitySpec {
    pub fn validate(&self, d: usize, m: usize) -> Result<()> {
        if self.ois.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.ois.len() });
        }
        if self.spreads.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.spreads.len() });
        }
        for s in &self.spreads {
            if s.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: s.len() });
            }
        }
        let all = self.ois.iter().chain(self.spreads.iter().flatten());
        for v in all {
            if !(v.scale.is_finite() && v.decay.is_finite() && v.decay >= 0.0) {
                return Err(Error::InvalidInput(format!("bad volatility parameters {v:?}")));
            }
        }
        if let Some(sd) = &self.state_dependence {
            if !(sd.floor >= 0.0 && sd.cap >= sd.floor && sd.lambda >= 0.0) {
                return Err(Error::InvalidInput("state dependence needs 0 <= floor <= cap".into()));
            }
        }
        Ok(())
    }

    /// Vol vector of curve `k` (0 = OIS, `i >= 1` = spread `i`).
    pub fn curve(&self, k: usize) -> &[ExpVol] {
        if k == 0 {
            &self.ois
        } else {
            &self.spreads[k - 1]
        }
    }

    pub fn sigma(&self, k: usize, tau: f64) -> Vec<f64> {
        self.curve(k).iter().map(|v| v.at(tau)).collect()
    }

    pub fn big_sigma(&self, k: usize, tau: f64) -> Vec<f64> {
        self.curve(k).iter().map(|v| v.integral(tau)).collect()
    }
}

/// Result of checking declared state-dependence bounds on sampled curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsCheck {
    /// Largest observed `sup_s |Z(h)(s)|`.
    pub max_integrated: f64,
    /// Largest observed `|zeta(h)|_lambda`.
    pub max_norm: f64,
    /// Largest observed Lipschitz ratio over sample pairs.
    pub max_lipschitz: f64,
    pub holds: bool,
}

/// Discrete `H^lambda` norm of a vector-valued function sampled at spacing
/// `dx`: `|h(0)|^2 + sum_j |(h_{j+1} - h_j)/dx|^2 e^{lambda x_j} dx`.
pub fn h_lambda_norm(samples: &[Vec<f64>], dx: f64, lambda: f64) -> f64 {
    let Some(first) = samples.first() else { return 0.0 };
    let mut s: f64 = first.iter().map(|v| v * v).sum();
    for j in 0..samples.len().saturating_sub(1) {
        let d2: f64 = samples[j + 1].iter().zip(&samples[j]).map(|(a, b)| ((a - b) / dx).powi(2)).sum();
        s += d2 * (lambda * j as f64 * dx).exp() * dx;
    }
    s.sqrt()
}

fn zeta_samples(vols: &[ExpVol], sd: &StateDependence, theta: &[f64], dx: f64) -> Vec<Vec<f64>> {
    theta
        .iter()
        .enumerate()
        .map(|(j, &th)| vols.iter().map(|v| v.at(j as f64 * dx) * sd.multiplier(th)).collect())
        .collect()
}

/// Validate the declared bounds of curve `k`'s state-dependent volatility on
/// a set of sampled curves (each sampled at spacing `dx` from `x = 0`).
pub fn check_state_bounds(spec: &VolatilitySpec, k: usize, curves: &[Vec<f64>], dx: f64) -> Result<BoundsCheck> {
    let sd = spec.state_dependence.as_ref().ok_or_else(|| Error::InvalidInput("no state dependence".into()))?;
    let vols = spec.curve(k);
    let zetas: Vec<Vec<Vec<f64>>> = curves.iter().map(|c| zeta_samples(vols, sd, c, dx)).collect();
    let mut max_integrated = 0.0f64;
    let mut max_norm = 0.0f64;
    for z in &zetas {
        let mut acc = vec![0.0; vols.len()];
        for row in z {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v * dx;
            }
            max_integrated = max_integrated.max(acc.iter().map(|a| a * a).sum::<f64>().sqrt());
        }
        max_norm = max_norm.max(h_lambda_norm(z, dx, sd.lambda));
    }
    let mut max_lipschitz = 0.0f64;
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            let dh: Vec<Vec<f64>> = curves[a].iter().zip(&curves[b]).map(|(x, y)| vec![x - y]).collect();
            let dz: Vec<Vec<f64>> =
                zetas[a].iter().zip(&zetas[b]).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect();
            let nh = h_lambda_norm(&dh, dx, sd.lambda);
            if nh > 0.0 {
                max_lipschitz = max_lipschitz.max(h_lambda_norm(&dz, dx, sd.lambda) / nh);
            }
        }
    }
    let b = sd.bounds;
    Ok(BoundsCheck {
        max_integrated,
        max_norm,
        max_lipschitz,
        holds: max_integrated <= b.c && max_norm <= b.m && max_lipschitz <= b.l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_of_exponential_vol() {
        let v = ExpVol { scale: 0.01, decay: 0.5 };
        assert!((v.integral(2.0) - 0.01 * (1.0 - (-1.0f64).exp()) / 0.5).abs() < 1e-16);
        assert!((ExpVol::constant(0.01).integral(3.0) - 0.03).abs() < 1e-16);
    }

    #[test]
    fn state_bounds_detect_violation() {
        let sd = StateDependence {
            beta: 5.0,
            floor: 0.5,
            cap: 2.0,
            lambda: 0.1,
            bounds: VolBounds { c: 1.0, l: 1.0, m: 1.0 },
        };
        let spec = VolatilitySpec {
            ois: vec![ExpVol { scale: 0.01, decay: 0.3 }],
            spreads: vec![],
            state_dependence: Some(sd),
        };
        let dx = 0.05;
        let curves: Vec<Vec<f64>> =
            (0..4).map(|k| (0..200).map(|j| 0.01 * k as f64 + 1e-4 * j as f64).collect()).collect();
        let ok = check_state_bounds(&spec, 0, &curves, dx).unwrap();
        assert!(ok.holds, "{ok:?}");
        let mut tight = spec.clone();
        tight.state_dependence.as_mut().unwrap().bounds.m = 1e-4;
        assert!(!check_state_bounds(&tight, 0, &curves, dx).unwrap().holds);
    }
}
