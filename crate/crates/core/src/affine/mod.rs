//! Affine multiple-curve models.
//!
//! A process `(X, Y, Z)` whose Fourier-Laplace transform is exponentially
//! affine in the initial state, with `X` on `R^p_+ x R^q`, spot spreads
//! `exp(u_i.Y)` and bank account `exp(-Z)`. Bonds and spreads are read off
//! the Riccati exponents `phi` and `psi`; a deterministic shift re-anchors
//! them to bootstrapped curves.

mod curves;
mod fourier;
mod riccati;
mod sim;
mod spec;

pub use curves::{affine_bond, affine_spread, affine_transform, shifted_curves, ShiftedCurves};
pub use fourier::{
    caplet_price_fourier, caplet_prices_fourier, shifted_caplet_price_fourier, shifted_caplet_prices_fourier, Caplet,
    FourierOptions,
};
pub use riccati::{solve_riccati, RiccatiOptions, RiccatiSolution, EXPLOSION_THRESHOLD};
pub use sim::{simulate_affine, AffineSimConfig};
pub use spec::{AffineJump, AffineModelSpec, ShortRate, StateSpace, XDynamics, YDynamics};
