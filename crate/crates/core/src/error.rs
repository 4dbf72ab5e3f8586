use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("oracle size {n} exceeds cap {cap}")]
    OracleCap { n: usize, cap: usize },

    #[error("kernel series does not converge within {k_max} terms (tail magnitude {tail:.3e})")]
    Divergent { k_max: usize, tail: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("all weights are zero")]
    EmptySupport,

    #[error("Frobenius norm of the reference matrix is zero")]
    ZeroNorm,

    #[error(
        "degenerate transition at node {node}, walk {walk}, step {step}: denominator {denominator:.3e}"
    )]
    DegenerateTransition {
        node: usize,
        walk: usize,
        step: usize,
        denominator: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a positive finite number, got {value}"),
        })
    }
}
