use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("maturity {maturity} lies beyond the last pillar {last_pillar} and extrapolation is disabled")]
    ExtrapolationDisabled { maturity: f64, last_pillar: f64 },
    #[error("time {0} is outside the curve domain")]
    OutOfDomain(f64),
    #[error("maturities must be strictly increasing (found {previous} followed by {next})")]
    NonIncreasingMaturities { previous: f64, next: f64 },
    #[error("no quotes supplied for {0}")]
    EmptyQuotes(String),
    #[error("root-finding failed for pillar {pillar}: {reason}")]
    NoSolution { pillar: f64, reason: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("path set is empty")]
    EmptyPathSet,
    #[error("path set has no observation at t={time} for maturity {maturity}")]
    MissingObservation { time: f64, maturity: f64 },
    #[error("time step {dt} is not an integer multiple of the grid spacing {dx}")]
    GridMismatch { dt: f64, dx: f64 },
    #[error("simulation grid too short: need {needed}, have {available}")]
    GridTooShort { needed: f64, available: f64 },
    #[error("step size {dt} exceeds horizon {horizon}")]
    StepTooLarge { dt: f64, horizon: f64 },
    #[error("{aborted} of {total} paths aborted (non-finite state)")]
    TooManyAbortedPaths { aborted: usize, total: usize },
    #[error("Riccati solution exploded at t={time}")]
    Explosion { time: f64 },
    #[error("Riccati integration did not reach tolerance {tolerance} (estimate {estimate})")]
    RiccatiAccuracy { tolerance: f64, estimate: f64 },
    #[error("inadmissible affine specification: {0}")]
    Inadmissible(String),
    #[error("damping {alpha} is outside the admissible domain")]
    DampingOutOfDomain { alpha: f64 },
    #[error("Fourier quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),
    #[error("moment problem is infeasible")]
    Infeasible,
    #[error("moment problem infeasible after grid refinement")]
    InfeasibleAfterCheck,
    #[error("jump kernel infeasible at t={time}, y={level}")]
    KernelInfeasible { time: f64, level: f64 },
    #[error("linear program failed: {0}")]
    LinearProgram(String),
    #[error("price {price} is outside the no-arbitrage bounds [{lower}, {upper}]")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },
    #[error("calibration stopped after {0} iterations without converging")]
    MaxIterations(usize),
    #[error("objective evaluated to NaN")]
    ObjectiveNaN,
}

pub type Result<T> = std::result::Result<T, Error>;
