use crate::lp::LpError;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid dual point: {0}")]
    InvalidDualPoint(String),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("linear program failure: {0}")]
    Lp(#[from] LpError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
