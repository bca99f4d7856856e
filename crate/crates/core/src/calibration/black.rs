use crate::error::{Error, Result};
use crate::numerics::{norm_cdf, norm_pdf};

fn check(forward: f64, strike: f64, expiry: f64) -> Result<()> {
    if !(forward > 0.0) || !(strike > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Black needs positive forward and strike (got {forward}, {strike}); use a displacement"
        )));
    }
    if !(expiry >= 0.0) {
        return Err(Error::InvalidInput(format!("expiry {expiry} must be nonnegative")));
    }
    Ok(())
}

/// `(price, d price / d s)` in terms of the total deviation `s = vol sqrt(T)`.
fn black_total(forward: f64, strike: f64, s: f64, annuity: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (annuity * (forward - strike).max(0.0), 0.0);
    }
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    let d2 = d1 - s;
    (annuity * (forward * norm_cdf(d1) - strike * norm_cdf(d2)), annuity * forward * norm_pdf(d1))
}

/// Black-76 caplet on a forward rate: `annuity (F N(d1) - K N(d2))`, where
/// `annuity` is `delta B(0, T + delta)` times the notional.
pub fn black_caplet(forward: f64, strike: f64, expiry: f64, vol: f64, annuity: f64) -> Result<f64> {
    check(forward, strike, expiry)?;
    if !(vol >= 0.0) {
        return Err(Error::InvalidInput(format!("vol {vol} must be nonnegative")));
    }
    Ok(black_total(forward, strike, vol * expiry.sqrt(), annuity).0)
}

/// Black caplet on the displaced rate `L + shift`.
pub fn black_caplet_displaced(
    forward: f64,
    strike: f64,
    expiry: f64,
    vol: f64,
    annuity: f64,
    shift: f64,
) -> Result<f64> {
    black_caplet(forward + shift, strike + shift, expiry, vol, annuity)
}

/// Inverts [`black_caplet`] by safeguarded Newton on `vol sqrt(T)`: each
/// step that leaves the current bracket is replaced by bisection.
pub fn black_implied_vol(price: f64, forward: f64, strike: f64, expiry: f64, annuity: f64) -> Result<f64> {
    check(forward, strike, expiry)?;
    let lower = annuity * (forward - strike).max(0.0);
    let upper = annuity * forward;
    let out = || Error::PriceOutOfBounds { price, lower, upper };
    if !price.is_finite() || !(annuity > 0.0) || expiry == 0.0 || price >= upper {
        return Err(out());
    }
    let slack = 1e-15 * upper;
    if price <= lower {
        return if price >= lower - slack { Ok(0.0) } else { Err(out()) };
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while black_total(forward, strike, hi, annuity).0 < price {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(out());
        }
    }
    // Brenner-Subrahmanyam near the money, the inflection point away from it.
    let guess = (price / upper * (2.0 * std::f64::consts::PI).sqrt()).max((2.0 * (forward / strike).ln().abs()).sqrt());
    let mut s = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (p, vega) = black_total(forward, strike, s, annuity);
        let f = p - price;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - f / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let done = (next - s).abs() <= 1e-15 * (1.0 + s) || hi - lo <= 1e-15 * (1.0 + s);
        s = next;
        if done {
            break;
        }
    }
    Ok(s / expiry.sqrt())
}

/// [`black_implied_vol`] for the displaced rate `L + shift`.
pub fn black_implied_vol_displaced(
    price: f64,
    forward: f64,
    strike: f64,
    expiry: f64,
    annuity: f64,
    shift: f64,
) -> Result<f64> {
    black_implied_vol(price, forward + shift, strike + shift, expiry, annuity)
}
