use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical conditioning: {0}")]
    Conditioning(String),

    #[error("{stage} subproblem infeasible (violated: {})", violated.join(", "))]
    Infeasible { stage: String, violated: Vec<String> },

    #[error("backend lacks cones {required:?} (available: {available:?})")]
    Capability {
        required: Vec<crate::conic::ConeKind>,
        available: Vec<crate::conic::ConeKind>,
    },

    #[error("solver failure in {stage}: {detail}")]
    Solver { stage: String, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
