//! Multiple yield curve term-structure modelling.
//!
//! * [`termstructure`] — OIS discount curves and multiplicative spread
//!   curves, bootstrapped from market quotes.
//! * [`products`] — FRAs, OIS/IRS/basis swaps in closed form; caplets and
//!   swaptions on simulated paths.
//! * [`hjm`] — Lévy-driven HJM dynamics for OIS forwards and forward spread
//!   rates, simulated on a Musiela grid.
//! * [`affine`] — affine multiple-curve models: Riccati transforms, bond and
//!   spread formulas, deterministic shifts, simulation and Fourier caplets.
//! * [`moment`] — jump kernels solving the spot-spread moment problem.
//! * [`calibration`] — Black-76 utilities and caplet-vol calibration.

pub mod affine;
pub mod calibration;
pub mod error;
pub mod hjm;
pub mod moment;
pub mod numerics;
pub mod pathset;
pub mod products;
pub mod rng;
pub mod termstructure;

pub use error::{Error, Result};
pub use pathset::{McEstimate, Observation, PathSet};
