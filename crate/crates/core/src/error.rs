use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model parameter violates one of its constraints.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A state or argument lies outside the region an operation is defined on.
    #[error("outside domain: {0}")]
    Domain(String),

    #[error("no sign change on bracket [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("root finder did not converge in {iterations} iterations; last bracket [{lo}, {hi}]")]
    Convergence { iterations: usize, lo: f64, hi: f64 },

    #[error("bracket expansion found no sign change up to {limit}")]
    Divergence { limit: f64 },

    /// The surrender charge belongs to the other restricted regime (or to none).
    #[error("regime error: {0}")]
    Regime(String),

    /// The feedback investment strategy is undefined on a free boundary.
    #[error("strategy undefined on the boundary at w = {w}, a = {a}")]
    Boundary { w: f64, a: f64 },

    /// The state lies in the purchase region; the optimal action is a jump purchase.
    #[error(
        "state (w = {w}, a = {a}) is in the purchase region; buy {delta_a} of annuity income first"
    )]
    PurchaseRegion { w: f64, a: f64, delta_a: f64 },

    #[error("closed-form solve failed: {0}")]
    Solve(String),

    #[error("time step too large: {0}")]
    StepSize(String),

    #[error("finite-difference solver did not converge after {iterations} sweeps (residual {residual:e})")]
    GridConvergence { iterations: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
