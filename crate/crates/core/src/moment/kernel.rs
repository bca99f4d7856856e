use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::lp::{self, LpOptions, LpOutcome};

/// Weights below this are dropped from a solved kernel.
pub const PRUNE_WEIGHT: f64 = 1e-14;
/// Scaled equality tolerance accepted for a solved kernel.
pub const MOMENT_TOL: f64 = 1e-8;

/// Right-hand side of the spot-spread moment problem at one `(t, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTargets {
    /// Strictly increasing positive spread loadings `u_1 < ... < u_m`.
    pub u: Vec<f64>,
    /// Targets `p^i = eta^i(t) - Psi^{Y-hat}(u_i)`.
    pub p: Vec<f64>,
    /// Cap `H-bar` on the integrability moment.
    pub cap: f64,
    /// Current level `y >= 0`; jumps must satisfy `xi >= -y`.
    pub floor: f64,
    /// Prescribed integrability moment `p^{m+1}`; when absent it is chosen
    /// as `min(H-bar, 1.05 x minimal attainable)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl MomentTargets {
    pub fn validate(&self) -> Result<()> {
        if self.u.is_empty() || self.u.len() != self.p.len() {
            return Err(Error::DimensionMismatch { expected: self.u.len(), got: self.p.len() });
        }
        if !(self.u[0] > 0.0) || self.u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("u must be positive and strictly increasing".into()));
        }
        if !(self.cap > 0.0) || !(self.floor >= 0.0) {
            return Err(Error::InvalidInput("cap must be positive and floor non-negative".into()));
        }
        if self.p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite moment target".into()));
        }
        Ok(())
    }

    /// `g_i(xi) = e^{u_i xi} - 1` for `i < m`, and
    /// `g_{m+1}(xi) = (|xi| v 1) e^{(u_m v 1)|xi|}`.
    pub fn moments(&self, xi: f64) -> Vec<f64> {
        let mut g: Vec<f64> = self.u.iter().map(|&u| (u * xi).exp_m1()).collect();
        g.push(integrability_weight(&self.u, xi));
        g
    }
}

pub fn integrability_weight(u: &[f64], xi: f64) -> f64 {
    let um = u.last().copied().unwrap_or(1.0).max(1.0);
    xi.abs().max(1.0) * (um * xi.abs()).exp()
}

/// Candidate jump sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportGrid {
    pub points: Vec<f64>,
}

impl SupportGrid {
    /// Log-spaced points on `(0, xi_max]` and, if `floor > 0`, on
    /// `[-floor, 0)`; zero itself is excluded.
    pub fn log_spaced(floor: f64, xi_max: f64, size: usize) -> Result<Self> {
        if !(xi_max > 0.0) || size < 2 || !(floor >= 0.0) {
            return Err(Error::InvalidInput("support grid needs xi_max > 0, size >= 2, floor >= 0".into()));
        }
        let n_neg = if floor > 0.0 { size / 2 } else { 0 };
        let n_pos = size - n_neg;
        let log_range = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![hi];
            }
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
        };
        let mut points: Vec<f64> = log_range(1e-4 * floor, floor, n_neg).into_iter().rev().map(|x| -x).collect();
        if let Some(p) = points.first_mut() {
            *p = -floor;
        }
        points.extend(log_range(1e-4 * xi_max, xi_max, n_pos));
        Ok(Self { points })
    }

    /// Default grid for the given targets: `xi_max = 5 / u_1`, 400 points.
    pub fn default_for(targets: &MomentTargets) -> Result<Self> {
        Self::log_spaced(targets.floor, 5.0 / targets.u[0], 400)
    }

    /// Same range, twice the density.
    pub fn refined(&self, floor: f64) -> Result<Self> {
        let xi_max = self.points.iter().copied().fold(f64::MIN, f64::max);
        Self::log_spaced(floor, xi_max, 2 * self.points.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelObjective {
    #[default]
    MinTotalMass,
    MinIntegrabilityMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub xi: f64,
    pub w: f64,
}

/// Discrete jump measure `sum_j w_j delta_{xi_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct JumpKernel {
    pub atoms: Vec<Atom>,
    /// Integrability moment `p^{m+1}` the kernel was solved for.
    #[serde(default)]
    pub bound: f64,
    #[serde(default)]
    pub residuals: Vec<f64>,
}

impl JumpKernel {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// `Psi(u) = sum_j w_j (e^{u xi_j} - 1)`.
    pub fn exponent(&self, u: f64) -> f64 {
        self.atoms.iter().map(|a| a.w * (u * a.xi).exp_m1()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// `r_i = sum_j w_j g_i(xi_j) - p^i`, including the integrability row.
pub fn kernel_moment_residual(kernel: &JumpKernel, targets: &MomentTargets) -> Vec<f64> {
    let m = targets.u.len();
    let mut r = vec![0.0; m + 1];
    for a in &kernel.atoms {
        for (ri, g) in r.iter_mut().zip(targets.moments(a.xi)) {
            *ri += a.w * g;
        }
    }
    for i in 0..m {
        r[i] -= targets.p[i];
    }
    r[m] -= targets.bound.unwrap_or(kernel.bound);
    r
}

/// Outcome of the conic-hull feasibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Feasibility {
    /// A non-negative weight vector on the grid meeting the constraints.
    Feasible { weights: Vec<f64> },
    /// Farkas ray `z` over the constraint rows (`m` moments, then the
    /// integrability row): `z^T g(xi) >= 0` at every grid point while
    /// `z^T p < 0`.
    Infeasible { ray: Vec<f64> },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }
}

fn is_support(xi: f64, floor: f64) -> bool {
    xi >= -floor - 1e-15 && xi != 0.0
}

/// Constraint matrix over the grid; with `slack`, the integrability row is
/// an inequality `<= rhs` via one extra column.
fn system(targets: &MomentTargets, grid: &SupportGrid, slack: bool) -> (DMatrix<f64>, Vec<f64>) {
    let m = targets.u.len();
    let xs: Vec<f64> = grid.points.iter().copied().filter(|&x| is_support(x, targets.floor)).collect();
    let n = xs.len() + usize::from(slack);
    let mut a = DMatrix::zeros(m + 1, n);
    for (j, &x) in xs.iter().enumerate() {
        for (i, g) in targets.moments(x).into_iter().enumerate() {
            a[(i, j)] = g;
        }
    }
    if slack {
        a[(m, n - 1)] = 1.0;
    }
    (a, xs)
}

fn rhs(targets: &MomentTargets, bound: f64) -> DVector<f64> {
    let mut b: Vec<f64> = targets.p.clone();
    b.push(bound);
    DVector::from_vec(b)
}

/// Phase-1 test of whether the targets lie in the conic hull of the grid's
/// moment vectors. Without a prescribed `p^{m+1}` the integrability row is
/// the inequality `<= H-bar`.
pub fn feasibility_check(targets: &MomentTargets, grid: &SupportGrid) -> Result<Feasibility> {
    targets.validate()?;
    let slack = targets.bound.is_none();
    let (a, xs) = system(targets, grid, slack);
    let b = rhs(targets, targets.bound.unwrap_or(targets.cap));
    let c = DVector::zeros(a.ncols());
    Ok(match lp::solve(&a, &b, &c, &LpOptions::default())? {
        LpOutcome::Optimal { x, .. } => Feasibility::Feasible { weights: x.iter().take(xs.len()).copied().collect() },
        LpOutcome::Infeasible { ray } => Feasibility::Infeasible { ray: ray.iter().copied().collect() },
        LpOutcome::Unbounded => return Err(Error::LinearProgram("feasibility LP unbounded".into())),
    })
}

fn extremal_integrability_mass(targets: &MomentTargets, grid: &SupportGrid, sign: f64) -> Result<Option<f64>> {
    let m = targets.u.len();
    let (full, _) = system(targets, grid, false);
    let a = full.rows(0, m).into_owned();
    let b = DVector::from_vec(targets.p.clone());
    let c = DVector::from_fn(a.ncols(), |j, _| sign * full[(m, j)]);
    match lp::solve(&a, &b, &c, &LpOptions::default())? {
        LpOutcome::Optimal { objective, .. } => Ok(Some(sign * objective)),
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Ok(Some(f64::INFINITY)),
    }
}

fn solve_on_grid(targets: &MomentTargets, grid: &SupportGrid, objective: KernelObjective) -> Result<JumpKernel> {
    let m = targets.u.len();
    if targets.p.iter().all(|&p| p == 0.0) && targets.bound.unwrap_or(0.0) == 0.0 {
        return Ok(JumpKernel { atoms: Vec::new(), bound: 0.0, residuals: vec![0.0; m + 1] });
    }
    let bound = match targets.bound {
        Some(b) => b,
        None => {
            let lo = extremal_integrability_mass(targets, grid, 1.0)?.ok_or(Error::InfeasibleAfterCheck)?;
            if lo > targets.cap * (1.0 + 1e-12) {
                return Err(Error::InfeasibleAfterCheck);
            }
            let hi = extremal_integrability_mass(targets, grid, -1.0)?.unwrap_or(lo);
            targets.cap.min((1.05 * lo).min(hi)).max(lo)
        }
    };
    let (a, xs) = system(targets, grid, false);
    let b = rhs(targets, bound);
    let c = DVector::from_fn(a.ncols(), |j, _| match objective {
        KernelObjective::MinTotalMass => 1.0,
        KernelObjective::MinIntegrabilityMass => a[(m, j)],
    });
    let x = match lp::solve(&a, &b, &c, &LpOptions::default())? {
        LpOutcome::Optimal { x, .. } => x,
        _ => return Err(Error::InfeasibleAfterCheck),
    };
    let atoms: Vec<Atom> =
        xs.iter().zip(x.iter()).filter(|(_, &w)| w >= PRUNE_WEIGHT).map(|(&xi, &w)| Atom { xi, w }).collect();
    let mut kernel = JumpKernel { atoms, bound, residuals: Vec::new() };
    let mut t = targets.clone();
    t.bound = Some(bound);
    kernel.residuals = kernel_moment_residual(&kernel, &t);
    let scale = b.amax().max(1.0);
    if kernel.residuals.iter().any(|r| r.abs() > MOMENT_TOL * scale) {
        return Err(Error::InfeasibleAfterCheck);
    }
    Ok(kernel)
}

/// Solve the moment problem on `grid`; on numerical failure retry once on a
/// grid of twice the density.
pub fn solve_jump_kernel(
    targets: &MomentTargets,
    grid: &SupportGrid,
    objective: KernelObjective,
) -> Result<JumpKernel> {
    targets.validate()?;
    match solve_on_grid(targets, grid, objective) {
        Ok(k) => Ok(k),
        Err(Error::InfeasibleAfterCheck) => solve_on_grid(targets, &grid.refined(targets.floor)?, objective),
        Err(e) => Err(e),
    }
}
