use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve has no Laurent coefficients")]
    EmptySpec,
    #[error("map is not univalent on the exterior disc: {0}")]
    NonUnivalent(String),
    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("grid too small: need at least {need} points (power of two), got {got}")]
    GridTooSmall { need: usize, got: usize },
    #[error("branch unwrapping failed at grid point ({row}, {col}): phase jump {jump:.3}")]
    BranchUnwrapFailure { row: usize, col: usize, jump: f64 },
    #[error("Grunsky norm estimate {0} is not below 1")]
    KappaGeOne(f64),
    #[error("cross-check '{what}' failed: discrepancy {gap:e} exceeds {tol:e}")]
    CrossCheckFailure { what: &'static str, gap: f64, tol: f64 },
    #[error("discarded Fourier energy fraction {0:e} exceeds 1e-8")]
    TailTooLarge(f64),
    #[error("I + K is ill-conditioned (kappa = {0})")]
    IllConditioned(f64),
    #[error("curvature evaluation failed at node {0}")]
    QuadratureDivergence(usize),
    #[error("second-kind boundary system is singular")]
    SolveFailure,
    #[error("particles {0} and {1} collide")]
    Collision(usize, usize),
    #[error("non-finite energy encountered")]
    NonFiniteEnergy,
    #[error("tensor grid with {n} particles and {grid} points per axis exceeds the quadrature budget")]
    GridExplosion { n: usize, grid: usize },
    #[error("integration node {node} failed: {reason}")]
    NodeFailure { node: usize, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a numerical tolerance or conditioning check, as
    /// opposed to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BranchUnwrapFailure { .. }
                | Error::KappaGeOne(_)
                | Error::CrossCheckFailure { .. }
                | Error::TailTooLarge(_)
                | Error::IllConditioned(_)
                | Error::QuadratureDivergence(_)
                | Error::SolveFailure
                | Error::NonFiniteEnergy
                | Error::NodeFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
