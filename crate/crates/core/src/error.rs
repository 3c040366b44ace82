use thiserror::Error;

use crate::types::TimeAllocation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} s is outside the trajectory span [0, {total}] s")]
    OutOfRange { t: f64, total: f64 },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("numerical failure: {message} (condition estimate {condition:.3e})")]
    Numerical { message: String, condition: f64 },

    #[error("no feasible time allocation after {evaluations} cost evaluations")]
    Infeasible {
        /// Least-violating allocation seen during the search.
        best: TimeAllocation,
        evaluations: usize,
    },

    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    #[error("no reachable goal candidate, holding position")]
    HoldPosition,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
