//! Jump kernels for the orthogonal spot-spread component `Y-perp`.
//!
//! At each `(t, y)` the kernel must carry prescribed exponential moments
//! `int (e^{u_i xi} - 1) K(d xi) = p^i` on the support `[-y, inf)`, plus a
//! bounded integrability moment. The continuum problem is discretised on a
//! log-spaced support grid and solved as a linear program.

mod kernel;
pub mod lp;
mod simulate;

pub use kernel::{
    feasibility_check, integrability_weight, kernel_moment_residual, solve_jump_kernel, Atom, Feasibility, JumpKernel,
    KernelObjective, MomentTargets, SupportGrid, MOMENT_TOL, PRUNE_WEIGHT,
};
pub(crate) use simulate::{advance, KernelCache};
pub use simulate::{simulate_yperp, FixedKernel, KernelFamily, StaticTargets, YPerpPath};
