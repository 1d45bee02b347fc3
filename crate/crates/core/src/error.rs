use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("polytope is empty")]
    InfeasiblePolytope,

    #[error("polytope is unbounded")]
    UnboundedPolytope,

    #[error("enumeration guard exceeded: {what} = {value} > {limit}")]
    EnumerationGuard {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
