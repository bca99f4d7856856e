//! Dense two-phase primal simplex for small equality-form LPs,
//! `min c^T x  s.t.  A x = b, x >= 0`.
//!
//! Bland's rule (lowest index enters, lowest basis index leaves on ties)
//! makes the pivot sequence — and therefore the returned vertex — a
//! deterministic function of the input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// Optimal basic solution; `basis` lists the basic columns.
    Optimal {
        x: DVector<f64>,
        basis: Vec<usize>,
        objective: f64,
    },
    /// Farkas certificate `z` with `z^T A >= 0` column-wise and `z^T b < 0`.
    Infeasible {
        ray: DVector<f64>,
    },
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Phase-1 objective above this (in scaled units) means infeasible.
    pub feasibility_tol: f64,
    /// Reduced costs above `-optimality_tol` (relative to the column's cost
    /// magnitude) are treated as non-negative.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_iter: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-11, optimality_tol: 1e-10, pivot_tol: 1e-12, max_iter: 10_000 }
    }
}

struct Tableau {
    /// Constraint matrix including artificial columns, scaled.
    a: DMatrix<f64>,
    b: DVector<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.a.nrows(), self.basis.len(), |i, k| self.a[(i, self.basis[k])])
    }

    /// Runs the simplex for costs `c` restricted to columns `< n_allowed`
    /// (plus whatever is basic). Returns the duals on success.
    fn optimise(&mut self, c: &DVector<f64>, n_allowed: usize, opts: &LpOptions) -> Result<Option<DVector<f64>>> {
        let m = self.a.nrows();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..opts.max_iter {
            // Near-parallel columns can make roundoff-sized reduced costs
            // alternate sign; a revisited basis means we are at the optimum
            // to working precision.
            let mut key = self.basis.clone();
            key.sort_unstable();
            if !seen.insert(key) {
                let bm = self.basis_matrix();
                let cb = DVector::from_fn(m, |k, _| c[self.basis[k]]);
                let duals =
                    bm.transpose().lu().solve(&cb).ok_or_else(|| Error::LinearProgram("singular basis".into()))?;
                return Ok(Some(duals));
            }
            let bm = self.basis_matrix();
            let lu = bm.clone().lu();
            let cb = DVector::from_fn(m, |k, _| c[self.basis[k]]);
            let duals = bm.transpose().lu().solve(&cb).ok_or_else(|| Error::LinearProgram("singular basis".into()))?;
            let xb = lu.solve(&self.b).ok_or_else(|| Error::LinearProgram("singular basis".into()))?;

            let mut entering = None;
            for j in 0..n_allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let priced = self.a.column(j).dot(&duals);
                let rc = c[j] - priced;
                if rc < -opts.optimality_tol * (1.0 + c[j].abs().max(priced.abs())) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(Some(duals));
            };
            let dir = lu
                .solve(&self.a.column(j).into_owned())
                .ok_or_else(|| Error::LinearProgram("singular basis".into()))?;
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..m {
                if dir[k] > opts.pivot_tol {
                    let ratio = xb[k].max(0.0) / dir[k];
                    let better = match leave {
                        None => true,
                        Some((kl, r)) => {
                            ratio < r - 1e-15 * r.abs().max(1.0)
                                || ((ratio - r).abs() <= 1e-15 * r.abs().max(1.0) && self.basis[k] < self.basis[kl])
                        }
                    };
                    if better {
                        leave = Some((k, ratio));
                    }
                }
            }
            match leave {
                None => return Ok(None),
                Some((k, _)) => self.basis[k] = j,
            }
        }
        Err(Error::LinearProgram("simplex iteration limit reached".into()))
    }
}

/// Solve `min c^T x, A x = b, x >= 0`.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, opts: &LpOptions) -> Result<LpOutcome> {
    let (m, n) = a.shape();
    if b.len() != m || c.len() != n {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    // Row scaling to unit max-norm, then column scaling.
    let mut row_scale = DVector::from_element(m, 1.0);
    let mut scaled = a.clone();
    let mut rhs = b.clone();
    for i in 0..m {
        let s = scaled.row(i).amax().max(f64::MIN_POSITIVE);
        row_scale[i] = 1.0 / s;
        scaled.row_mut(i).scale_mut(1.0 / s);
        rhs[i] /= s;
    }
    let mut col_scale = DVector::from_element(n, 1.0);
    for j in 0..n {
        let s = scaled.column(j).amax();
        if s > 0.0 {
            col_scale[j] = 1.0 / s;
            scaled.column_mut(j).scale_mut(1.0 / s);
        }
    }
    // Flip rows so that rhs >= 0.
    let mut flip = DVector::from_element(m, 1.0);
    for i in 0..m {
        if rhs[i] < 0.0 {
            flip[i] = -1.0;
            scaled.row_mut(i).neg_mut();
            rhs[i] = -rhs[i];
        }
    }
    let mut full = DMatrix::zeros(m, n + m);
    full.view_mut((0, 0), (m, n)).copy_from(&scaled);
    for i in 0..m {
        full[(i, n + i)] = 1.0;
    }
    let mut tab = Tableau { a: full, b: rhs.clone(), basis: (n..n + m).collect() };

    // Phase 1.
    let c1 = DVector::from_fn(n + m, |j, _| if j >= n { 1.0 } else { 0.0 });
    let duals1 = tab.optimise(&c1, n, opts)?.ok_or_else(|| Error::LinearProgram("phase 1 unbounded".into()))?;
    let lu = tab.basis_matrix().lu();
    let xb = lu.solve(&tab.b).ok_or_else(|| Error::LinearProgram("singular basis".into()))?;
    let infeas: f64 = tab.basis.iter().zip(xb.iter()).filter(|(&j, _)| j >= n).map(|(_, &v)| v.max(0.0)).sum();
    if infeas > opts.feasibility_tol {
        // Phase-1 duals y satisfy y^T a_j <= 0 and y^T b = infeas > 0 in the
        // scaled, flipped system; map -y back to the caller's rows.
        let ray = DVector::from_fn(m, |i, _| -duals1[i] * flip[i] * row_scale[i]);
        return Ok(LpOutcome::Infeasible { ray });
    }

    // Drive artificials out of the basis where possible.
    for k in 0..m {
        if tab.basis[k] < n {
            continue;
        }
        let bm = tab.basis_matrix();
        let Some(inv) = bm.try_inverse() else { break };
        let row = inv.row(k).into_owned();
        if let Some(j) = (0..n).find(|&j| !tab.basis.contains(&j) && row.dot(&tab.a.column(j).transpose()).abs() > 1e-9)
        {
            tab.basis[k] = j;
        }
    }

    // Phase 2: artificials may stay basic only at level zero (redundant rows).
    // Costs in scaled variables: x_j = col_scale_j * x'_j.
    let c2 = DVector::from_fn(n + m, |j, _| if j < n { c[j] * col_scale[j] } else { 0.0 });
    let duals2 = tab.optimise(&c2, n, opts)?;
    if duals2.is_none() {
        return Ok(LpOutcome::Unbounded);
    }

    // Recover the basic solution of the unscaled system by a direct solve.
    let basic: Vec<usize> = tab.basis.iter().copied().filter(|&j| j < n).collect();
    let mut x = DVector::zeros(n);
    if !basic.is_empty() {
        let bsub = DMatrix::from_fn(m, basic.len(), |i, k| a[(i, basic[k])]);
        let sol = if basic.len() == m {
            bsub.clone().lu().solve(b)
        } else {
            let svd = bsub.clone().svd(true, true);
            svd.solve(b, 1e-14).ok()
        };
        let sol = sol.ok_or_else(|| Error::LinearProgram("singular final basis".into()))?;
        for (k, &j) in basic.iter().enumerate() {
            x[j] = sol[k].max(0.0);
        }
    }
    let objective = c.dot(&x);
    Ok(LpOutcome::Optimal { x, basis: basic, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_lp() {
        // min -x0 - x1  s.t. x0 + 2 x1 + s0 = 4, 3 x0 + x1 + s1 = 6
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 1.0, 0.0, 3.0, 1.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![4.0, 6.0]);
        let c = DVector::from_vec(vec![-1.0, -1.0, 0.0, 0.0]);
        match solve(&a, &b, &c, &LpOptions::default()).unwrap() {
            LpOutcome::Optimal { x, objective, .. } => {
                assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
                assert!((objective + 2.8).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certifies_infeasibility() {
        // x0 + x1 = -1 with x >= 0 is infeasible.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0]);
        let c = DVector::zeros(2);
        let LpOutcome::Infeasible { ray } = solve(&a, &b, &c, &LpOptions::default()).unwrap() else {
            panic!("expected infeasible");
        };
        assert!((ray.transpose() * &a).iter().all(|&v| v >= -1e-12));
        assert!(ray.dot(&b) < 0.0);
    }

    #[test]
    fn detects_unbounded() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let c = DVector::from_vec(vec![0.0, -1.0]);
        assert_eq!(solve(&a, &b, &c, &LpOptions::default()).unwrap(), LpOutcome::Unbounded);
    }
}
