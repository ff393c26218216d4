//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Arrays or grids that do not line up.
    #[error("shape error: {0}")]
    Shape(String),
    /// A strategy violating the feasibility clauses.
    #[error("invalid strategy: {0}")]
    Validation(String),
    /// A caller-side precondition that does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// No sample with positive intensity sum to the right of the limit point.
    #[error("empty right limit after node {0}")]
    EmptyLimit(usize),
    #[error("lattice error: {0}")]
    Lattice(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Model(_) | Error::Domain(_) => 2,
            _ => 3,
        }
    }
}
