//! Lévy-driven HJM dynamics for the OIS forward curve and the forward
//! spread curves, with no-arbitrage drifts and Musiela-grid simulation.

mod levy;
mod model;
mod sim;
mod vol;

pub use levy::{JumpAtom, LevyTriplet};
pub use model::{Cone, LevyHjmModel, YMode};
pub use sim::{
    consistency_residual, simulate_hjm, ConsistencyReport, DriftMode, HjmDiagnostics, HjmSimConfig, HjmSimulation,
    OrderingReport, ORDERING_TOL,
};
pub use vol::{check_state_bounds, h_lambda_norm, BoundsCheck, ExpVol, StateDependence, VolBounds, VolatilitySpec};
