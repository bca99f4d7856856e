//! Small numerical building blocks shared by the term-structure, affine and
//! calibration modules.

mod quadrature;
mod roots;

pub use quadrature::{gauss_legendre, GaussLegendre};
pub use roots::{find_root, RootOptions};

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
