use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("evaluation box too small: argmax on the box boundary for interior slope {slope:?}; enlarge the box")]
    BoxTooSmall { slope: Vec<f64> },

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("enumeration budget exceeded: {needed} permutation tuples > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("singular matrix")]
    Singular,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("solver did not converge after {iterations} iterations (best value {best_value}, residual {residual})")]
    NonConvergence {
        iterations: usize,
        best_value: f64,
        residual: f64,
    },

    #[error("all {0} optimizer starts collapsed to a singular configuration")]
    AllStartsSingular(usize),

    #[error("insufficient points: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
