//! OIS discount curves and tenor-indexed multiplicative spread curves, with
//! bootstrapping from par quotes.
//!
//! Year fractions are ACT/365-fixed throughout. Discount factors are
//! interpolated log-linearly (piecewise-constant instantaneous forwards) and
//! spreads linearly in log-spread (piecewise-constant forward spread rates).

mod bootstrap;
mod discount;
mod quotes;
mod spread;
mod tenor;

pub use bootstrap::{
    bootstrap_curve_set, bootstrap_ois, bootstrap_spread_curve, CurveSet, SpreadBootstrap, SpreadWarning,
};
pub use discount::{DiscountCurve, DiscountInterpolation};
pub use quotes::{MarketQuoteSet, OisQuote, SpreadQuote, SpreadQuoteKind};
pub use spread::{fra_rate, spread_from_rates, SpreadCurve, SpreadInterpolation};
pub use tenor::{Schedule, Tenor};

/// Tolerance used when matching dates that should coincide.
pub const DATE_EPS: f64 = 1e-9;
