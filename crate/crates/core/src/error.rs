use thiserror::Error;

/// Errors raised by the simulator.
///
/// Recoverable conditions inside the fixed-point driver (window too long,
/// margin shortfall) are not errors; they travel as shrink signals.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Newton iteration did not converge in {iters} iterations (residual {residual:e})")]
    NewtonDivergence { iters: usize, residual: f64 },

    #[error("order parameter left (0,1): value {value} at point {index}")]
    RangeViolation { index: usize, value: f64 },

    #[error("inner Picard loop did not contract in {iters} iterations (last increment {increment:e})")]
    NoContraction { iters: usize, increment: f64 },

    #[error("margin violation: min margin {min_margin:e} at point {index}, level {level}")]
    MarginViolation {
        min_margin: f64,
        level: usize,
        index: usize,
    },

    #[error("root not bracketed on the upper branch at r = {r}, target = {target:e}")]
    BracketFailure { r: f64, target: f64 },

    #[error("xi exceeded its ceiling: {value:e} > {ceiling:e}")]
    XiCeiling { value: f64, ceiling: f64 },

    #[error("window underflow: T = {window:e} < 16 dt = {limit:e}")]
    WindowUnderflow { window: f64, limit: f64 },

    #[error("initial data rejected: {0}")]
    InvalidInitialData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
