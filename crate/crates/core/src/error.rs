use thiserror::Error;

use crate::metric::PointId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point id {0:?}")]
    UnknownPoint(PointId),
    #[error("point with key {0} is already live")]
    DuplicateKey(u64),
    #[error("point {0:?} is not live")]
    NotLive(PointId),
    #[error("distance {observed} between {p:?} and {q:?} exceeds declared aspect ratio bound {bound}")]
    AspectRatioViolated { p: PointId, q: PointId, observed: f64, bound: f64 },
    #[error("backend does not support this operation: {0}")]
    UnsupportedBackend(&'static str),
    #[error("instance too large for exact solver: {0}")]
    BudgetExceeded(String),
    #[error("exact solver contract violated: got {got}, limit {limit}")]
    OfflineContract { got: String, limit: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("snapshot requested at a non-clean operation ({passive} passive vertices)")]
    NotClean { passive: usize },
    #[error("malformed stream line {line}: {reason}")]
    MalformedStream { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
