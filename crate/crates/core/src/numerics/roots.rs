use crate::error::{Error, Result};

/// Controls for [`find_root`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than this.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { f_tol: 1e-14, x_tol: 1e-16, max_iter: 200 }
    }
}

/// Bracketed root finder mixing secant (regula falsi with the Illinois
/// modification) and bisection steps.
///
/// The initial bracket `[lo, hi]` is expanded geometrically outward if the
/// function does not change sign on it. `label` identifies the pillar in the
/// error.
pub fn find_root<F>(mut f: F, mut lo: f64, mut hi: f64, opts: RootOptions, label: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut f_lo = f(lo)?;
    if f_lo.abs() <= opts.f_tol {
        return Ok(lo);
    }
    let mut f_hi = f(hi)?;
    if f_hi.abs() <= opts.f_tol {
        return Ok(hi);
    }
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() {
        if expansions >= 60 || !f_lo.is_finite() || !f_hi.is_finite() {
            return Err(Error::NoSolution { pillar: label, reason: "could not bracket a root".into() });
        }
        let width = hi - lo;
        lo -= width;
        hi += width;
        f_lo = f(lo)?;
        f_hi = f(hi)?;
        expansions += 1;
    }

    let mut side = 0i8;
    let mut best = if f_lo.abs() < f_hi.abs() { lo } else { hi };
    for iter in 0..opts.max_iter {
        // Alternate a bisection step every fourth iteration so slow secant
        // progress cannot stall the bracket.
        let mut x = if iter % 4 == 3 { 0.5 * (lo + hi) } else { (lo * f_hi - hi * f_lo) / (f_hi - f_lo) };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if !fx.is_finite() {
            return Err(Error::NoSolution { pillar: label, reason: "non-finite residual".into() });
        }
        best = x;
        if fx.abs() <= opts.f_tol || (hi - lo) <= opts.x_tol * (1.0 + x.abs()) {
            return Ok(x);
        }
        if fx.signum() == f_hi.signum() {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    // Bracket collapsed to adjacent floats without meeting f_tol: accept the
    // last iterate if it is as good as floating point allows.
    let fb = f(best)?;
    if fb.abs() <= opts.f_tol * 1e3 {
        Ok(best)
    } else {
        Err(Error::NoSolution { pillar: label, reason: format!("residual {fb:e} after {} iterations", opts.max_iter) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = find_root(|x| Ok(x * x * x - 2.0), 0.0, 1.0, RootOptions::default(), 0.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn expands_bracket() {
        let r = find_root(|x| Ok(x - 10.0), 0.0, 1.0, RootOptions::default(), 0.0).unwrap();
        assert!((r - 10.0).abs() < 1e-13);
    }

    #[test]
    fn reports_missing_root() {
        let err = find_root(|x| Ok(x * x + 1.0), -1.0, 1.0, RootOptions::default(), 3.0).unwrap_err();
        assert!(matches!(err, Error::NoSolution { pillar, .. } if pillar == 3.0));
    }
}
