use thiserror::Error;

/// Errors surfaced by the forecasting engine and its harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("imbedding constant is unbounded: {0}")]
    UnboundedConstant(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("degenerate test function: {0}")]
    DegenerateFunction(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 input/config, 2 solver, 3 acceptance.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverFailure(_) => 2,
            _ => 1,
        }
    }
}
